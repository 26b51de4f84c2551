// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "qrnn/graph.hpp"

namespace qrnn {

// Populates value_info for every intermediate tensor using per-op dtype and
// shape rules. MatMul/Conv2D on INT inputs get an accumulator dtype wide
// enough for the worst-case dot product over the actual reduction length.
// Returns a new graph; throws TypeConflict on rule violations.
Graph infer_types(const Graph& g);

// Shape/dtype of one tensor (input, initializer or value_info entry).
ValueInfo tensor_info(const Graph& g, const std::string& name);

// Accumulator dtype for a dot product of `reduction` terms with the given
// operand dtypes.
DataType matmul_accumulator_dtype(const DataType& a, const DataType& b,
                                  std::int64_t reduction);

}  // namespace qrnn
