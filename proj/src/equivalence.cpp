// SPDX-License-Identifier: Apache-2.0
#include "qrnn/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "qrnn/executor.hpp"

namespace qrnn {

namespace {

Tensor random_feed(const GraphInput& in, std::mt19937_64& rng,
                   const EquivalenceConfig& cfg) {
  Tensor t(in.shape, in.dtype);
  if (in.dtype.is_int()) {
    std::uniform_int_distribution<std::int64_t> dist(in.dtype.min(),
                                                     in.dtype.max());
    for (auto& v : t.values) v = double(dist(rng));
  } else {
    std::uniform_real_distribution<double> dist(cfg.float_lo, cfg.float_hi);
    for (auto& v : t.values) {
      double u = dist(rng);
      if (cfg.grid_scale > 0.0) {
        // Snap next to a grid point; decision boundaries sit at half steps.
        double k = std::floor(u / cfg.grid_scale);
        u = cfg.grid_scale * (k + cfg.grid_offset);
      }
      v = u;
    }
  }
  return t;
}

struct SampleResult {
  double max_abs = 0.0;
  double max_rel = 0.0;
  std::int64_t mismatches = 0;
};

SampleResult compare_outputs(const TensorMap& ra, const TensorMap& rb,
                             const std::vector<std::string>& outputs) {
  SampleResult r;
  for (const auto& name : outputs) {
    const Tensor& ta = ra.at(name);
    const Tensor& tb = rb.at(name);
    if (ta.values.size() != tb.values.size()) {
      r.mismatches += 1;
      continue;
    }
    bool integer = ta.dtype.is_int() && tb.dtype.is_int();
    for (size_t i = 0; i < ta.values.size(); ++i) {
      double va = ta.values[i], vb = tb.values[i];
      if (integer) {
        if (va != vb) r.mismatches += 1;
        continue;
      }
      double abs = std::fabs(va - vb);
      double rel = abs / std::max({std::fabs(va), std::fabs(vb), 1e-300});
      r.max_abs = std::max(r.max_abs, abs);
      r.max_rel = std::max(r.max_rel, rel);
    }
  }
  return r;
}

}  // namespace

EquivalenceReport verify_equivalence(const Graph& a, const Graph& b,
                                     const EquivalenceConfig& cfg) {
  if (a.inputs.size() != b.inputs.size() || a.outputs != b.outputs)
    throw SignatureMismatch("graphs disagree on inputs or outputs");
  for (size_t i = 0; i < a.inputs.size(); ++i) {
    if (a.inputs[i].name != b.inputs[i].name ||
        a.inputs[i].shape != b.inputs[i].shape ||
        a.inputs[i].dtype != b.inputs[i].dtype)
      throw SignatureMismatch("input " + a.inputs[i].name +
                              " differs between graphs");
  }

  EquivalenceReport report;
  report.samples = cfg.n_samples;
  ExecutionContext ctx;
  ctx.parallel = false;  // sample-level parallelism instead

  std::vector<SampleResult> results(cfg.n_samples);
  std::exception_ptr first_error;
#pragma omp parallel for if (cfg.parallel) schedule(dynamic)
  for (int s = 0; s < cfg.n_samples; ++s) {
    try {
      // Per-sample rng: aggregation is order-independent.
      std::mt19937_64 rng(cfg.seed + std::uint64_t(s));
      TensorMap feeds;
      for (const auto& in : a.inputs)
        feeds[in.name] = random_feed(in, rng, cfg);
      TensorMap ra = execute(a, feeds, ctx);
      TensorMap rb = execute(b, feeds, ctx);
      results[s] = compare_outputs(ra, rb, a.outputs);
    } catch (...) {
      // Exceptions must not unwind out of the parallel region.
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  for (const auto& r : results) {
    report.max_abs_err = std::max(report.max_abs_err, r.max_abs);
    report.max_rel_err = std::max(report.max_rel_err, r.max_rel);
    report.int_mismatches += r.mismatches;
  }
  report.pass =
      report.int_mismatches == 0 && report.max_rel_err <= cfg.rel_tol;
  return report;
}

std::string equivalence_report_json(const EquivalenceReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"samples\":" << r.samples << ",\"max_abs_err\":" << r.max_abs_err
     << ",\"max_rel_err\":" << r.max_rel_err
     << ",\"int_mismatches\":" << r.int_mismatches
     << ",\"pass\":" << (r.pass ? "true" : "false") << "}";
  return os.str();
}

}  // namespace qrnn
