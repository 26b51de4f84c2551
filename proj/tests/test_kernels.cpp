// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <random>

#include "doctest.h"
#include "qrnn/kernels.hpp"
#include "testutil.hpp"

using namespace qrnn;
namespace tu = qrnn::testutil;

namespace {

std::vector<double> rnd(std::int64_t n, std::mt19937_64& rng, double lo = -2,
                        double hi = 2) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("matmul kernels: omp variant is bit-identical to the serial one") {
  std::mt19937_64 rng(1);
  for (auto [m, k, n] : {std::tuple<int, int, int>{1, 1, 1},
                         {3, 7, 5},
                         {25, 104, 64},
                         {33, 129, 65}}) {
    auto a = rnd(m * k, rng), b = rnd(k * n, rng);
    std::vector<double> o1(m * n), o2(m * n);
    kern::matmul_f64_serial(a.data(), b.data(), o1.data(), m, k, n);
    kern::matmul_f64_omp(a.data(), b.data(), o2.data(), m, k, n);
    CHECK(o1 == o2);
  }
}

TEST_CASE("integer matmul: exact accumulation and range detection") {
  std::mt19937_64 rng(2);
  std::int64_t m = 4, k = 16, n = 4;
  std::vector<double> a(m * k), b(k * n), o1(m * n), o2(m * n);
  std::uniform_int_distribution<int> d(-31, 31);
  for (auto& v : a) v = d(rng);
  for (auto& v : b) v = d(rng);
  CHECK(kern::matmul_i64_serial(a.data(), b.data(), o1.data(), m, k, n,
                                -1000000, 1000000));
  CHECK(kern::matmul_i64_omp(a.data(), b.data(), o2.data(), m, k, n, -1000000,
                             1000000));
  CHECK(o1 == o2);
  // naive oracle
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::int64_t r = 0; r < k; ++r) acc += a[i * k + r] * b[r * n + j];
      CHECK(o1[i * n + j] == acc);
    }
  // a too-narrow accumulator range is reported
  CHECK_FALSE(
      kern::matmul_i64_serial(a.data(), b.data(), o1.data(), m, k, n, -1, 1));
}

TEST_CASE("eltwise kernels: broadcast modes, serial == omp") {
  std::mt19937_64 rng(3);
  std::int64_t n = 4 * 6 * 10;
  auto a = rnd(n, rng);
  for (auto op : {kern::BinaryOp::ADD, kern::BinaryOp::SUB, kern::BinaryOp::MUL}) {
    // scalar, full, channel broadcast
    for (auto [inner, mod, bn] : {std::tuple<std::int64_t, std::int64_t,
                                             std::int64_t>{1, 1, 1},
                                  {1, n, n},
                                  {60, 4, 4}}) {
      auto b = rnd(bn, rng);
      std::vector<double> o1(n), o2(n);
      kern::eltwise_serial(op, a.data(), b.data(), o1.data(), n, inner, mod);
      kern::eltwise_omp(op, a.data(), b.data(), o2.data(), n, inner, mod);
      CHECK(o1 == o2);
    }
  }
}

TEST_CASE("multithreshold kernel: counts match a naive loop") {
  std::mt19937_64 rng(4);
  Matrix t(5, std::vector<double>(7));
  for (auto& row : t) {
    row = rnd(7, rng, -3, 3);
    std::sort(row.begin(), row.end());
  }
  std::int64_t n = 5 * 13;
  auto x = rnd(n, rng, -4, 4);
  std::vector<double> o1(n), o2(n);
  kern::multithreshold_serial(x.data(), o1.data(), n, 5, t, 0.5, -1.0);
  kern::multithreshold_omp(x.data(), o2.data(), n, 5, t, 0.5, -1.0);
  CHECK(o1 == o2);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& row = t[i % 5];
    int count = 0;
    for (double tv : row)
      if (x[i] >= tv) ++count;
    CHECK(o1[i] == 0.5 * count - 1.0);
  }
}

TEST_CASE("conv kernel: serial == omp including stride and padding") {
  std::mt19937_64 rng(5);
  for (auto [stride, pad] : {std::pair<int, int>{1, 0}, {1, 1}, {2, 1}}) {
    kern::Conv2DDims d{2, 3, 9, 7, 4, 3, 3, stride, pad};
    auto x = rnd(d.batch * d.c_in * d.h_in * d.w_in, rng);
    auto w = rnd(d.c_out * d.c_in * d.kh * d.kw, rng);
    auto bias = rnd(d.c_out, rng);
    std::vector<double> o1(d.batch * d.c_out * d.h_out() * d.w_out());
    std::vector<double> o2(o1.size());
    kern::conv2d_serial(x.data(), w.data(), bias.data(), o1.data(), d);
    kern::conv2d_omp(x.data(), w.data(), bias.data(), o2.data(), d);
    CHECK(o1 == o2);
  }
}

TEST_CASE("unary kernels: serial == omp") {
  std::mt19937_64 rng(6);
  std::int64_t n = 1000;
  auto x = rnd(n, rng, -5, 5);
  for (auto op :
       {kern::UnaryOp::TANH, kern::UnaryOp::SIGMOID, kern::UnaryOp::RELU}) {
    std::vector<double> o1(n), o2(n);
    kern::unary_serial(op, x.data(), o1.data(), n);
    kern::unary_omp(op, x.data(), o2.data(), n);
    CHECK(o1 == o2);
  }
}
