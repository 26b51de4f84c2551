// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "qrnn/datatype.hpp"

namespace qrnn {

// Dense row-major tensor. Values are stored as doubles regardless of dtype;
// INT dtypes constrain values to integers within the dtype range (all
// representable exactly for bits <= 32).
struct Tensor {
  std::vector<std::int64_t> shape;
  DataType dtype = DataType::f64();
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::int64_t> shape_, DataType dtype_)
      : shape(std::move(shape_)), dtype(dtype_), values(numel_of(shape), 0.0) {}
  Tensor(std::vector<std::int64_t> shape_, DataType dtype_,
         std::vector<double> values_)
      : shape(std::move(shape_)), dtype(dtype_), values(std::move(values_)) {}

  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  std::int64_t numel() const { return numel_of(shape); }
  bool is_scalar() const { return numel() == 1; }

  static Tensor scalar(double v, DataType dt = DataType::f64()) {
    return Tensor({1}, dt, {v});
  }

  bool operator==(const Tensor& o) const {
    return shape == o.shape && dtype == o.dtype && values == o.values;
  }
};

}  // namespace qrnn
