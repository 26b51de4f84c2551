// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace qrnn {

enum class DTypeKind { INT, FLOAT };

// Tensor element type. FLOAT tensors evaluate in 64-bit precision; INT
// tensors carry `bits` (1..32) and a signedness flag.
struct DataType {
  DTypeKind kind = DTypeKind::FLOAT;
  int bits = 0;
  bool is_signed = false;

  static DataType f64() { return DataType{DTypeKind::FLOAT, 0, false}; }
  static DataType int_t(int bits, bool is_signed) {
    return DataType{DTypeKind::INT, bits, is_signed};
  }

  bool is_int() const { return kind == DTypeKind::INT; }
  bool is_float() const { return kind == DTypeKind::FLOAT; }

  // Integer range implied by (bits, signed). Only valid for INT.
  std::int64_t min() const {
    return is_signed ? -(std::int64_t(1) << (bits - 1)) : 0;
  }
  std::int64_t max() const {
    return is_signed ? (std::int64_t(1) << (bits - 1)) - 1
                     : (std::int64_t(1) << bits) - 1;
  }

  bool operator==(const DataType& o) const {
    if (kind != o.kind) return false;
    if (kind == DTypeKind::FLOAT) return true;
    return bits == o.bits && is_signed == o.is_signed;
  }
  bool operator!=(const DataType& o) const { return !(*this == o); }

  std::string str() const;
};

// Smallest INT dtype whose range covers [lo, hi]. Signed iff lo < 0.
DataType fit_int_range(std::int64_t lo, std::int64_t hi);

}  // namespace qrnn
