// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "qrnn/graph.hpp"

namespace qrnn {

struct EquivalenceReport {
  int samples = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::int64_t int_mismatches = 0;
  bool pass = false;
};

struct EquivalenceConfig {
  int n_samples = 100;
  std::uint64_t seed = 42;
  double rel_tol = 1e-6;
  double float_lo = -4.0;
  double float_hi = 4.0;
  // When > 0, float samples snap near the grid s*k + s*grid_offset so
  // quantizer decision boundaries (at half steps) are never hit.
  double grid_scale = 0.0;
  double grid_offset = 1e-3;
  bool parallel = true;
};

// Executes both graphs on seeded random inputs drawn within the declared
// input dtype ranges. Integer outputs are compared exactly; float outputs by
// relative error. Sample i uses an rng seeded with seed + i, so results are
// independent of evaluation order. Throws SignatureMismatch when the graphs'
// input/output signatures differ.
EquivalenceReport verify_equivalence(const Graph& a, const Graph& b,
                                     const EquivalenceConfig& cfg);

std::string equivalence_report_json(const EquivalenceReport& r);

}  // namespace qrnn
