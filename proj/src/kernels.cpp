// SPDX-License-Identifier: Apache-2.0
#include "qrnn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace qrnn::kern {

namespace {

bool read_parallel_env() {
  const char* v = std::getenv("QRNN_PARALLEL");
  if (!v) return true;
  return !(v[0] == '0' && v[1] == '\0');
}

bool g_parallel = read_parallel_env();

// Work thresholds below which the OpenMP variants fall back to the serial
// loop; tiny tensors are not worth a fork/join.
constexpr std::int64_t kMinParallelWork = 16 * 1024;

inline double apply_binary(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::ADD: return a + b;
    case BinaryOp::SUB: return a - b;
    case BinaryOp::MUL: return a * b;
  }
  return 0.0;
}

inline double apply_unary(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::TANH: return std::tanh(x);
    case UnaryOp::SIGMOID: return 1.0 / (1.0 + std::exp(-x));
    case UnaryOp::RELU: return x > 0.0 ? x : 0.0;
  }
  return 0.0;
}

inline std::int64_t count_met(const std::vector<double>& row, double x) {
  // row sorted ascending; count of t <= x  ==  #{j : x >= t_j}
  return std::upper_bound(row.begin(), row.end(), x) - row.begin();
}

}  // namespace

bool parallel_enabled() { return g_parallel; }
void set_parallel_enabled(bool on) { g_parallel = on; }

void matmul_f64_serial(const double* a, const double* b, double* out,
                       std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t r = 0; r < k; ++r) acc += a[i * k + r] * b[r * n + j];
      out[i * n + j] = acc;
    }
  }
}

void matmul_f64_omp(const double* a, const double* b, double* out,
                    std::int64_t m, std::int64_t k, std::int64_t n) {
  // Each output element keeps its serial reduction order, so the result is
  // bit-identical to the serial kernel for any thread count.
#pragma omp parallel for collapse(2) if (m * n * k > kMinParallelWork)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t r = 0; r < k; ++r) acc += a[i * k + r] * b[r * n + j];
      out[i * n + j] = acc;
    }
  }
}

bool matmul_i64_serial(const double* a, const double* b, double* out,
                       std::int64_t m, std::int64_t k, std::int64_t n,
                       std::int64_t acc_min, std::int64_t acc_max) {
  bool ok = true;
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      std::int64_t acc = 0;
      for (std::int64_t r = 0; r < k; ++r)
        acc += std::int64_t(a[i * k + r]) * std::int64_t(b[r * n + j]);
      if (acc < acc_min || acc > acc_max) ok = false;
      out[i * n + j] = double(acc);
    }
  }
  return ok;
}

bool matmul_i64_omp(const double* a, const double* b, double* out,
                    std::int64_t m, std::int64_t k, std::int64_t n,
                    std::int64_t acc_min, std::int64_t acc_max) {
  bool ok = true;
#pragma omp parallel for collapse(2) reduction(&& : ok) \
    if (m * n * k > kMinParallelWork)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      std::int64_t acc = 0;
      for (std::int64_t r = 0; r < k; ++r)
        acc += std::int64_t(a[i * k + r]) * std::int64_t(b[r * n + j]);
      if (acc < acc_min || acc > acc_max) ok = false;
      out[i * n + j] = double(acc);
    }
  }
  return ok;
}

void eltwise_serial(BinaryOp op, const double* a, const double* b, double* out,
                    std::int64_t n, std::int64_t b_inner, std::int64_t b_mod) {
  for (std::int64_t i = 0; i < n; ++i)
    out[i] = apply_binary(op, a[i], b[(i / b_inner) % b_mod]);
}

void eltwise_omp(BinaryOp op, const double* a, const double* b, double* out,
                 std::int64_t n, std::int64_t b_inner, std::int64_t b_mod) {
#pragma omp parallel for if (n > kMinParallelWork)
  for (std::int64_t i = 0; i < n; ++i)
    out[i] = apply_binary(op, a[i], b[(i / b_inner) % b_mod]);
}

void multithreshold_serial(const double* x, double* out, std::int64_t n,
                           std::int64_t channel_mod, const Matrix& thresholds,
                           double out_scale, double out_bias) {
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& row = thresholds[thresholds.size() == 1 ? 0 : i % channel_mod];
    out[i] = out_scale * double(count_met(row, x[i])) + out_bias;
  }
}

void multithreshold_omp(const double* x, double* out, std::int64_t n,
                        std::int64_t channel_mod, const Matrix& thresholds,
                        double out_scale, double out_bias) {
#pragma omp parallel for if (n * std::int64_t(thresholds[0].size()) > \
                             kMinParallelWork)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& row = thresholds[thresholds.size() == 1 ? 0 : i % channel_mod];
    out[i] = out_scale * double(count_met(row, x[i])) + out_bias;
  }
}

void unary_serial(UnaryOp op, const double* x, double* out, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) out[i] = apply_unary(op, x[i]);
}

void unary_omp(UnaryOp op, const double* x, double* out, std::int64_t n) {
#pragma omp parallel for if (n > kMinParallelWork / 8)
  for (std::int64_t i = 0; i < n; ++i) out[i] = apply_unary(op, x[i]);
}

namespace {

inline double conv_at(const double* x, const double* w, const double* bias,
                      const Conv2DDims& d, std::int64_t b, std::int64_t co,
                      std::int64_t ho, std::int64_t wo) {
  double acc = bias ? bias[co] : 0.0;
  for (std::int64_t ci = 0; ci < d.c_in; ++ci) {
    for (std::int64_t kh = 0; kh < d.kh; ++kh) {
      std::int64_t hi = ho * d.stride + kh - d.pad;
      if (hi < 0 || hi >= d.h_in) continue;
      for (std::int64_t kw = 0; kw < d.kw; ++kw) {
        std::int64_t wi = wo * d.stride + kw - d.pad;
        if (wi < 0 || wi >= d.w_in) continue;
        acc += x[((b * d.c_in + ci) * d.h_in + hi) * d.w_in + wi] *
               w[((co * d.c_in + ci) * d.kh + kh) * d.kw + kw];
      }
    }
  }
  return acc;
}

}  // namespace

void conv2d_serial(const double* x, const double* w, const double* bias,
                   double* out, const Conv2DDims& d) {
  std::int64_t ho_n = d.h_out(), wo_n = d.w_out();
  for (std::int64_t b = 0; b < d.batch; ++b)
    for (std::int64_t co = 0; co < d.c_out; ++co)
      for (std::int64_t ho = 0; ho < ho_n; ++ho)
        for (std::int64_t wo = 0; wo < wo_n; ++wo)
          out[((b * d.c_out + co) * ho_n + ho) * wo_n + wo] =
              conv_at(x, w, bias, d, b, co, ho, wo);
}

void conv2d_omp(const double* x, const double* w, const double* bias,
                double* out, const Conv2DDims& d) {
  std::int64_t ho_n = d.h_out(), wo_n = d.w_out();
  std::int64_t work = d.batch * d.c_out * ho_n * wo_n * d.c_in * d.kh * d.kw;
#pragma omp parallel for collapse(3) if (work > kMinParallelWork)
  for (std::int64_t b = 0; b < d.batch; ++b)
    for (std::int64_t co = 0; co < d.c_out; ++co)
      for (std::int64_t ho = 0; ho < ho_n; ++ho)
        for (std::int64_t wo = 0; wo < wo_n; ++wo)
          out[((b * d.c_out + co) * ho_n + ho) * wo_n + wo] =
              conv_at(x, w, bias, d, b, co, ho, wo);
}

}  // namespace qrnn::kern
