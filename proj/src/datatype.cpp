// SPDX-License-Identifier: Apache-2.0
#include "qrnn/datatype.hpp"

#include "qrnn/errors.hpp"

namespace qrnn {

std::string DataType::str() const {
  if (kind == DTypeKind::FLOAT) return "FLOAT";
  return (is_signed ? "INT" : "UINT") + std::to_string(bits);
}

DataType fit_int_range(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw TypeConflict("fit_int_range: empty range");
  bool sign = lo < 0;
  for (int bits = 1; bits <= 32; ++bits) {
    DataType dt = DataType::int_t(bits, sign);
    if (dt.min() <= lo && hi <= dt.max()) return dt;
  }
  throw TypeConflict("integer range [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "] exceeds 32 bits");
}

}  // namespace qrnn
