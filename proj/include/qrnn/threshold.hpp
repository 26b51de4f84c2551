// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "qrnn/graph.hpp"
#include "qrnn/quant.hpp"

namespace qrnn {

enum class ActivationKind { TANH, SIGMOID, RELU, IDENTITY };

// Multi-threshold operator attributes. Each row of `thresholds` is
// non-decreasing; +/-inf sentinels mark quantizer levels the activation
// cannot reach.
struct MultiThresholdAttrs {
  Matrix thresholds;  // C x L
  double out_scale = 1.0;
  double out_bias = 0.0;
  DataType out_dtype = DataType::f64();

  std::int64_t channels() const {
    return static_cast<std::int64_t>(thresholds.size());
  }
  std::int64_t levels() const {
    return thresholds.empty() ? 0
                              : static_cast<std::int64_t>(thresholds[0].size());
  }
};

// out[i] = out_scale * |{j : x[i] >= thresholds[c][j]}| + out_bias, where c is
// the channel of element i (last axis; a single threshold row broadcasts).
// Throws ShapeMismatch when channel counts disagree.
Tensor multithreshold(const Tensor& x, const MultiThresholdAttrs& attrs);

// Thresholds realizing quant_fused(f(x), qp_out) by comparisons:
// t_k = f^-1(scale * (qmin + k - 0.5 - zero_point)) for k = 1..L.
// Boundaries outside the activation's range become +/-inf sentinels and are
// reported through `diagnostics` (UnreachableLevels) when provided.
MultiThresholdAttrs gen_thresholds(ActivationKind kind,
                                   const QuantParams& qp_out,
                                   std::vector<std::string>* diagnostics = nullptr);

void set_multithreshold_attrs(Node& n, const MultiThresholdAttrs& attrs);
MultiThresholdAttrs multithreshold_attrs(const Node& n);

// Lowers quantizer sites to threshold form, inside Scan bodies too:
//   (Tanh|Sigmoid|ReLU)? -> Quant   becomes  MultiThreshold (raw count)
//       [-> Add(qmin - zp)] [-> Mul(scale)]
//   QuantizeLinear -> Clip          becomes  MultiThreshold -> Add(qmin - zp)
//       (integer codes, used at Scan state boundaries)
//   standalone DequantizeLinear     becomes  [Add(-zp) ->] Mul(scale)
// The integer code offset is emitted before the scale so downstream rewrites
// can absorb each piece where it belongs. Add/Mul are omitted when they would
// be identities.
PassResult convert_quant_to_thresholds_pass(const Graph& g);

}  // namespace qrnn
