// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "qrnn/graph.hpp"
#include "qrnn/threshold.hpp"

namespace qrnn::kern {

// Tensor kernels backing the interpreter. Each kernel has a serial reference
// implementation and an OpenMP variant parallelized over independent output
// elements; reductions stay serial per element, so both variants produce
// bit-identical results for any thread count. The serial versions are kept
// as the reference the parallel ones are tested and benchmarked against.

// out[m x n] = a[m x k] * b[k x n], 64-bit float accumulation.
void matmul_f64_serial(const double* a, const double* b, double* out,
                       std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_f64_omp(const double* a, const double* b, double* out,
                    std::int64_t m, std::int64_t k, std::int64_t n);

// Integer matmul with exact int64 accumulation. Returns false (without
// writing further) if any accumulator leaves [acc_min, acc_max].
bool matmul_i64_serial(const double* a, const double* b, double* out,
                       std::int64_t m, std::int64_t k, std::int64_t n,
                       std::int64_t acc_min, std::int64_t acc_max);
bool matmul_i64_omp(const double* a, const double* b, double* out,
                    std::int64_t m, std::int64_t k, std::int64_t n,
                    std::int64_t acc_min, std::int64_t acc_max);

enum class BinaryOp { ADD, SUB, MUL };

// Elementwise with broadcast index mapping:
// out[i] = a[i] op b[(i / b_inner) % b_mod]. Scalar b: (1, 1); same shape:
// (1, n); NCHW per-channel: (H*W, C).
void eltwise_serial(BinaryOp op, const double* a, const double* b, double* out,
                    std::int64_t n, std::int64_t b_inner, std::int64_t b_mod);
void eltwise_omp(BinaryOp op, const double* a, const double* b, double* out,
                 std::int64_t n, std::int64_t b_inner, std::int64_t b_mod);

// Per-element threshold count: out[i] = scale * #{j : x[i] >= t[c][j]} + bias.
// channel(i) = i % channels of the last axis; rows must be sorted ascending.
void multithreshold_serial(const double* x, double* out, std::int64_t n,
                           std::int64_t channel_mod, const Matrix& thresholds,
                           double out_scale, double out_bias);
void multithreshold_omp(const double* x, double* out, std::int64_t n,
                        std::int64_t channel_mod, const Matrix& thresholds,
                        double out_scale, double out_bias);

enum class UnaryOp { TANH, SIGMOID, RELU };

void unary_serial(UnaryOp op, const double* x, double* out, std::int64_t n);
void unary_omp(UnaryOp op, const double* x, double* out, std::int64_t n);

// Direct NCHW convolution, one output element per (co, ho, wo).
struct Conv2DDims {
  std::int64_t batch, c_in, h_in, w_in;
  std::int64_t c_out, kh, kw;
  std::int64_t stride, pad;
  std::int64_t h_out() const { return (h_in + 2 * pad - kh) / stride + 1; }
  std::int64_t w_out() const { return (w_in + 2 * pad - kw) / stride + 1; }
};

void conv2d_serial(const double* x, const double* w, const double* bias,
                   double* out, const Conv2DDims& d);
void conv2d_omp(const double* x, const double* w, const double* bias,
                double* out, const Conv2DDims& d);

// Process-wide switch consulted by the executor (default: parallel on,
// overridable with QRNN_PARALLEL=0).
bool parallel_enabled();
void set_parallel_enabled(bool on);

}  // namespace qrnn::kern
