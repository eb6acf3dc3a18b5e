#pragma once

// MM state inference. Each iteration solves the reweighted KKT system
//   (C^T C + W_x) x = C^T y - lambda alpha*
// through the matrix inverse lemma, with W_x = diag(mu / |x^i|).
//
// When the temporal term is active (lambda > 0 and a previous state is
// given), the smoothed innovation penalty is majorized by its tangent plus a
// (lambda / m) proximal term, so every step minimizes a true upper bound of
//   F(x) = 0.5||y - Cx||^2 + lambda f_s(x - A x_prev) + mu ||x||_1
// and F never increases. The fixed point is the same KKT point.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mmdpcn/majorizer.hpp"
#include "mmdpcn/model.hpp"
#include "mmdpcn/solve_trace.hpp"

namespace mmdpcn {

inline constexpr double kDefaultStateInit = 0.1;

struct StateResult {
  StateVector state;
  SolveTrace trace;
};

// Smoothed state objective F for one patch; `x_prev` null drops the temporal term.
double state_objective(const Vector& y, const Vector& x, const Vector* x_prev, const LayerModel& model,
                       const HyperParams& hp);

// ||grad F||_inf restricted to the support of x.
double state_kkt_residual(const Vector& y, const Vector& x, const Vector* x_prev, const LayerModel& model,
                          const HyperParams& hp);

// Runs up to `max_iter` MM steps from `start` (0 means hp.max_inner_iter).
// `solver` must wrap model.c. Stops early once the relative change of F falls
// below hp.inner_tol.
StateResult infer_state(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp,
                        const WoodburySolver& solver, const StateVector& start, std::size_t max_iter = 0);

StateResult infer_state(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp,
                        const std::optional<StateVector>& x_init = std::nullopt);

struct BatchStateResult {
  std::vector<StateVector> states;
  std::vector<SolveTrace> traces;
};

// N independent infer_state calls. `prev` may be empty (first frame).
// With `parallel`, patches are spread over hardware threads; results are
// identical to the sequential order.
BatchStateResult infer_states_batch(const PatchBatch& batch, std::span<const StateVector> prev,
                                    const LayerModel& model, const HyperParams& hp, bool parallel = false);
BatchStateResult infer_states_batch(const PatchBatch& batch, std::span<const StateVector> prev,
                                    const LayerModel& model, const HyperParams& hp, const WoodburySolver& solver,
                                    bool parallel = false);

}  // namespace mmdpcn
