#include "mmdpcn/solve_trace.hpp"

#include <cmath>

namespace mmdpcn {

std::size_t SolveTrace::iterations_to_within(double rel) const {
  return iterations_to_within(rel, final_objective());
}

std::size_t SolveTrace::iterations_to_within(double rel, double reference) const {
  const double bound = reference + rel * std::abs(reference);
  for (std::size_t i = 0; i < objective_per_iter.size(); ++i)
    if (objective_per_iter[i] <= bound) return i;
  return iterations + 1;
}

double zero_percent(std::span<const double> values, double threshold) {
  if (values.empty()) return 0.0;
  std::size_t zeros = 0;
  for (double v : values)
    if (std::abs(v) <= threshold) ++zeros;
  return 100.0 * static_cast<double>(zeros) / static_cast<double>(values.size());
}

}  // namespace mmdpcn
