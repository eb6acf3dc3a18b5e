#pragma once

// State-solver benchmark: MM against ISTA, FISTA and Adam on the same patches
// and dictionary, lambda = 0.

#include <string>
#include <vector>

#include "mmdpcn/config.hpp"
#include "mmdpcn/metrics.hpp"

namespace mmdpcn {

struct BenchInput {
  Matrix c;
  std::vector<Vector> patches;
};

// Synthetic sparse-generative patches (with their generating dictionary), or
// square tiles of side sqrt(p) cut from the frames in bench.patches_dir under
// a seeded random unit-column dictionary.
BenchInput bench_input(const BenchConfig& bench, std::uint64_t seed);

struct MethodRun {
  std::string method;
  std::vector<SolveTrace> traces;  // one per patch
  std::vector<double> energy;      // final E_x
  std::vector<double> spa;         // percent of |x_k| <= clamp_state
  std::vector<double> iters_to_1pct;
};

struct BenchReport {
  std::vector<MethodRun> runs;

  const MethodRun& run(const std::string& method) const;
  // <method>.energy, <method>.spa, <method>.iters_to_1pct
  std::vector<MetricRow> metric_rows() const;
  // <method>.wall_seconds
  std::vector<MetricRow> timing_rows() const;
};

// Methods: "mm", "ista", "fista", "adam". MM stops on its own tolerance
// (bench.hp.inner_tol) or at bench.baseline.max_iter; the baselines follow
// bench.baseline. Iterations-to-1% are measured against the lowest final
// objective any method reached on the same patch.
BenchReport run_bench(const BenchInput& input, const BenchConfig& bench, const std::vector<std::string>& methods);

// Per-iteration objective and sparsity, one row per (patch, iteration).
std::string trace_csv(const MethodRun& run);

}  // namespace mmdpcn
