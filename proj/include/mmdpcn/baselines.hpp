#pragma once

// Gradient-type reference solvers for the state objective: ISTA, FISTA and
// Adam. ISTA/FISTA take proximal steps on mu||x||_1 and treat the temporal
// term through its smooth approximation; Adam runs on the fully smoothed
// objective and clamps small entries once at the end.

#include <cstddef>
#include <optional>
#include <string_view>

#include "mmdpcn/model.hpp"
#include "mmdpcn/solve_trace.hpp"

namespace mmdpcn {

enum class BaselineMethod { Ista, Fista, Adam };

std::string_view to_string(BaselineMethod m);
BaselineMethod parse_baseline_method(std::string_view name);

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::Fista;
  double step = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_iter = 200;
  double tol = 1e-6;  // 0 runs the whole budget

  void validate() const;
};

struct BaselineResult {
  StateVector state;
  SolveTrace trace;
  double raw_sparsity = 0.0;  // percent of exact zeros before the final clamp (Adam)
};

// Largest eigenvalue of C^T C by power iteration.
double lipschitz_constant(const Matrix& c, std::size_t iters = 100);

// `x_init` defaults to zeros for ISTA/FISTA and to the MM start (0.1) for Adam.
BaselineResult ista_solve(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp,
                          const BaselineConfig& cfg, const std::optional<StateVector>& x_init = std::nullopt);
BaselineResult fista_solve(const Vector& y, const StateVector* x_prev, const LayerModel& model,
                           const HyperParams& hp, const BaselineConfig& cfg,
                           const std::optional<StateVector>& x_init = std::nullopt);
BaselineResult adam_solve(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp,
                          const BaselineConfig& cfg, const std::optional<StateVector>& x_init = std::nullopt);

// Dispatches on cfg.method.
BaselineResult baseline_solve(const Vector& y, const StateVector* x_prev, const LayerModel& model,
                              const HyperParams& hp, const BaselineConfig& cfg,
                              const std::optional<StateVector>& x_init = std::nullopt);

}  // namespace mmdpcn
