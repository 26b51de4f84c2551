// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "qrnn/graph.hpp"

namespace qrnn {

using TensorMap = std::map<std::string, Tensor>;

struct ExecutionContext {
  bool trace = false;
  std::int64_t step_budget = 10'000'000;  // node evaluations
  bool parallel = true;
};

// Evaluates nodes in topological order and returns all declared outputs.
// Deterministic: identical feeds give bit-identical outputs. Integer ops are
// checked against their inferred accumulator range and fail loudly on
// violation. Throws MissingFeed / ShapeMismatch / UnsupportedOp.
TensorMap execute(const Graph& g, const TensorMap& feeds,
                  const ExecutionContext& ctx = {});

// Scan semantics: iterates the body along axis 0 of each scan input, carrying
// state tensors; returns final states and per-step outputs stacked along
// axis 0. Exposed for direct testing; `execute` uses the same path.
struct ScanResult {
  std::vector<Tensor> final_states;
  std::vector<Tensor> stacked_outputs;
};
ScanResult execute_scan(const Graph& body, const std::vector<Tensor>& init_states,
                        const std::vector<Tensor>& scan_inputs,
                        const ExecutionContext& ctx = {});

}  // namespace qrnn
