// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrnn/graph.hpp"
#include "qrnn/tensor.hpp"

namespace qrnn {

// One uniform quantizer. Rounding is round-half-to-even throughout.
struct QuantParams {
  double scale = 1.0;
  std::int64_t zero_point = 0;
  int bits = 8;
  bool is_signed = true;
  bool narrow_range = false;

  std::int64_t qmin() const {
    if (!is_signed) return 0;
    std::int64_t m = -(std::int64_t(1) << (bits - 1));
    return narrow_range ? m + 1 : m;
  }
  std::int64_t qmax() const {
    return is_signed ? (std::int64_t(1) << (bits - 1)) - 1
                     : (std::int64_t(1) << bits) - 1;
  }
  std::int64_t levels() const { return qmax() - qmin(); }  // = L
  DataType dtype() const { return DataType::int_t(bits, is_signed); }

  bool operator==(const QuantParams& o) const {
    return scale == o.scale && zero_point == o.zero_point && bits == o.bits &&
           is_signed == o.is_signed && narrow_range == o.narrow_range;
  }
};

// Throws InvalidQuantParams if scale <= 0 or zero_point out of range.
void check_quant_params(const QuantParams& qp);

double round_half_even(double x);

// q = clamp(round_half_even(x / scale) + zero_point, qmin, qmax)
double quantize_value(double x, const QuantParams& qp);
// y = (q - zero_point) * scale; throws RangeError if q outside range.
double dequantize_value(double q, const QuantParams& qp);
// dequantize(quantize(x)); the execution semantics of the Quant node.
double quant_fused_value(double x, const QuantParams& qp);

Tensor quantize(const Tensor& x, const QuantParams& qp);
Tensor dequantize(const Tensor& q, const QuantParams& qp);
Tensor quant_fused(const Tensor& x, const QuantParams& qp);

// Node attribute encoding shared by QuantizeLinear / DequantizeLinear / Quant.
void set_quant_attrs(Node& n, const QuantParams& qp);
QuantParams quant_attrs(const Node& n);

struct PassReport {
  std::string pass;
  int applications = 0;
  int nodes_removed = 0;
  int nodes_added = 0;
  std::vector<std::string> diagnostics;
};

struct PassResult {
  Graph graph;
  PassReport report;
};

// Fuses every exclusive QuantizeLinear -> Clip -> DequantizeLinear chain with
// consistent parameters into one Quant node. Chains with mismatched
// parameters get an InconsistentQCDQ diagnostic and are left untouched.
// Applies inside Scan bodies.
PassResult fuse_qcdq_pass(const Graph& g);

}  // namespace qrnn
