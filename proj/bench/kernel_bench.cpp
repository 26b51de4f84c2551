// SPDX-License-Identifier: Apache-2.0
//
// Times the serial reference kernels against their OpenMP variants and
// checks that both produce identical bits.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qrnn/kernels.hpp"

using namespace qrnn;
namespace chrono = std::chrono;

namespace {

std::vector<double> random_vec(std::int64_t n, std::mt19937_64& rng,
                               double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <class F>
double time_ms(int reps, F&& fn) {
  auto t0 = chrono::high_resolution_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto t1 = chrono::high_resolution_clock::now();
  return chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double omp_ms, bool equal) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n",
              name, serial_ms, omp_ms, serial_ms / omp_ms,
              equal ? "bit-equal" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; omp variants run serially\n");
#endif
  std::mt19937_64 rng(7);
  const int reps = 20;

  {
    std::int64_t m = 64, k = 512, n = 512;
    auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
    std::vector<double> o1(m * n), o2(m * n);
    double ts = time_ms(reps, [&] {
      kern::matmul_f64_serial(a.data(), b.data(), o1.data(), m, k, n);
    });
    double tp = time_ms(reps, [&] {
      kern::matmul_f64_omp(a.data(), b.data(), o2.data(), m, k, n);
    });
    report("matmul_f64 64x512x512", ts, tp, o1 == o2);
  }
  {
    std::int64_t m = 25, k = 104, n = 64;  // lstm gate shape
    auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
    std::vector<double> o1(m * n), o2(m * n);
    double ts = time_ms(reps * 50, [&] {
      kern::matmul_f64_serial(a.data(), b.data(), o1.data(), m, k, n);
    });
    double tp = time_ms(reps * 50, [&] {
      kern::matmul_f64_omp(a.data(), b.data(), o2.data(), m, k, n);
    });
    report("matmul_f64 25x104x64", ts, tp, o1 == o2);
  }
  {
    kern::Conv2DDims d{1, 32, 50, 20, 64, 3, 3, 1, 1};
    auto x = random_vec(d.batch * d.c_in * d.h_in * d.w_in, rng);
    auto w = random_vec(d.c_out * d.c_in * d.kh * d.kw, rng);
    std::vector<double> o1(d.batch * d.c_out * d.h_out() * d.w_out());
    std::vector<double> o2(o1.size());
    double ts = time_ms(reps, [&] {
      kern::conv2d_serial(x.data(), w.data(), nullptr, o1.data(), d);
    });
    double tp = time_ms(reps, [&] {
      kern::conv2d_omp(x.data(), w.data(), nullptr, o2.data(), d);
    });
    report("conv2d 32->64 50x20", ts, tp, o1 == o2);
  }
  {
    std::int64_t n = 1 << 20;
    Matrix t(64, std::vector<double>(63));
    std::mt19937_64 trng(3);
    for (auto& row : t) {
      row = random_vec(63, trng, -3.0, 3.0);
      std::sort(row.begin(), row.end());
    }
    auto x = random_vec(n, rng, -4.0, 4.0);
    std::vector<double> o1(n), o2(n);
    double ts = time_ms(reps, [&] {
      kern::multithreshold_serial(x.data(), o1.data(), n, 64, t, 1.0, 0.0);
    });
    double tp = time_ms(reps, [&] {
      kern::multithreshold_omp(x.data(), o2.data(), n, 64, t, 1.0, 0.0);
    });
    report("multithreshold 1M x 63", ts, tp, o1 == o2);
  }
  {
    std::int64_t n = 1 << 22;
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    std::vector<double> o1(n), o2(n);
    double ts = time_ms(reps, [&] {
      kern::eltwise_serial(kern::BinaryOp::MUL, a.data(), b.data(), o1.data(),
                           n, 1, n);
    });
    double tp = time_ms(reps, [&] {
      kern::eltwise_omp(kern::BinaryOp::MUL, a.data(), b.data(), o2.data(), n,
                        1, n);
    });
    report("eltwise_mul 4M", ts, tp, o1 == o2);
  }
  return 0;
}
