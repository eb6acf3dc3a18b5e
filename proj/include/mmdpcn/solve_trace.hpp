#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mmdpcn {

// Per-iteration record shared by every solver. Entry 0 of the per-iteration
// lists describes the initial point.
struct SolveTrace {
  std::vector<double> objective_per_iter;
  std::vector<double> sparsity_per_iter;  // percent of exact zeros
  double wall_time = 0.0;                 // seconds
  std::size_t iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;  // inf-norm on the support at the returned point

  double final_objective() const { return objective_per_iter.empty() ? 0.0 : objective_per_iter.back(); }

  // First iteration whose objective is within `rel` of the final value, or
  // iterations + 1 if it never gets there.
  std::size_t iterations_to_within(double rel) const;
  std::size_t iterations_to_within(double rel, double reference) const;
};

// Percent of components with |v_k| <= threshold; 0 for an empty input.
double zero_percent(std::span<const double> values, double threshold = 0.0);

}  // namespace mmdpcn
