// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "qrnn/quant.hpp"
#include "qrnn/threshold.hpp"

namespace qrnn {

// Streamlining rewrite catalog. Every pass is a pure graph -> graph function,
// preserves outputs per its algebraic identity, and also applies inside Scan
// bodies. Non-applicable sites are skipped, some with a diagnostic.

// Add(const a) -> Mul(const b)  ==>  Mul(b) -> Add(a*b)
PassResult move_add_past_mul(const Graph& g);
// Add(scalar a) -> MatMul(W)  ==>  MatMul(W) -> Add(a * colsum(W))
PassResult move_scalar_add_past_matmul(const Graph& g);
// Mul(scalar c) -> MatMul(W)  ==>  MatMul(W) -> Mul(c)
PassResult move_scalar_mul_past_matmul(const Graph& g);
// (Mul(s1) x) . (Mul(s2) y)  ==>  (x . y) -> Mul(s1*s2)   [eltwise mul]
// Branches ending in Add are left alone (bias breaks the identity).
PassResult move_linear_past_eltwise_mul(const Graph& g);
// (Mul(s) x) + (Mul(s) y)  ==>  (x + y) -> Mul(s)   [eltwise add, equal s]
PassResult move_linear_past_eltwise_add(const Graph& g);
// Add(a) -> Add(b)  ==>  Add(a+b);  Mul(a) -> Mul(b)  ==>  Mul(a*b)
PassResult collapse_repeated_add(const Graph& g);
PassResult collapse_repeated_mul(const Graph& g);
// Add(a) -> MultiThreshold(T)  ==>  MultiThreshold(T - a)
PassResult absorb_add_into_multithreshold(const Graph& g);
// Mul(s>0) -> MultiThreshold(T)  ==>  MultiThreshold(T / s)
// NonPositiveScale diagnostic when s <= 0 (threshold order would flip).
PassResult absorb_mul_into_multithreshold(const Graph& g);
// MultiThreshold -> Add(b) folds b into out_bias; MultiThreshold -> Mul(m>0)
// folds m into out_scale/out_bias. Only integer-valued scalar constants fold
// (the code offsets of converted quantizers); fractional scale/bias must keep
// moving toward the next threshold operator instead.
PassResult absorb_sign_bias_into_multithreshold(const Graph& g);
// For integer-input thresholds: t -> ceil(t), clamped into
// [dtype_min, dtype_max + 1] ("never satisfied" sentinel).
PassResult round_and_clip_thresholds(const Graph& g);

const std::vector<std::string>& pass_names();
bool is_pass_name(const std::string& name);
PassResult run_pass(const std::string& name, const Graph& g);

// Default schedule: sign-bias absorption first (so integer code offsets fold
// before other moves can turn them into fractional biases), then moves,
// collapses, threshold absorption, and rounding.
const std::vector<std::string>& default_schedule();

struct PipelineResult {
  Graph graph;
  std::vector<PassReport> reports;
  int iterations = 0;
  bool fixpoint = false;
};

// Applies the scheduled passes until none changes the graph or the iteration
// cap is hit. Throws FixpointNotReached when the cap is exceeded while passes
// still fire.
PipelineResult streamline_pipeline(const Graph& g,
                                   const std::vector<std::string>& schedule =
                                       default_schedule(),
                                   int max_iterations = 32);

// Removes a trailing top-level dequantization (Mul/Add pair or
// DequantizeLinear) in front of a graph output, redeclaring the output to the
// integer tensor. Changes the graph signature; opt-in.
Graph drop_terminal_dequant(const Graph& g);

}  // namespace qrnn
