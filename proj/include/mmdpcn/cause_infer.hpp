#pragma once

// Cause inference. The plain form minimizes
//   E_u(u) = |X|^T (1 + exp(-B u)) + beta ||u||_1
// with the reweighted fixed point u <- (|u| / beta) B^T(|X| . exp(-B u)); the
// top-down form adds 0.5 ||u - u_hat||^2 and uses the diagonal
// (I + W_u)^{-1} = |u| / (|u| + beta).
//
// The raw fixed-point map overshoots once the optimum is far from zero, so
// each proposal is taken as a step u + tau (proposal - u) with tau halved
// until the objective does not increase. tau = 1 is the plain update.

#include <cstddef>
#include <optional>

#include "mmdpcn/model.hpp"
#include "mmdpcn/solve_trace.hpp"

namespace mmdpcn {

inline constexpr double kDefaultCauseInit = 0.1;

struct CauseResult {
  CauseVector cause;
  SolveTrace trace;
};

// E_u, plus 0.5||u - u_hat||^2 when `u_hat` is given.
double cause_objective(const Vector& u, const Vector& pooled, const Matrix& b, double beta,
                       const Vector* u_hat = nullptr);

double cause_kkt_residual(const Vector& u, const Vector& pooled, const Matrix& b, double beta,
                          const Vector* u_hat = nullptr);

CauseResult infer_cause(const PooledStateMagnitude& pooled, const LayerModel& model, const HyperParams& hp,
                        const CauseVector& start, std::size_t max_iter);
CauseResult infer_cause(const PooledStateMagnitude& pooled, const LayerModel& model, const HyperParams& hp,
                        const std::optional<CauseVector>& u_init = std::nullopt);

CauseResult infer_cause_topdown(const PooledStateMagnitude& pooled, const Vector& u_hat, const LayerModel& model,
                                const HyperParams& hp, const CauseVector& start, std::size_t max_iter);
CauseResult infer_cause_topdown(const PooledStateMagnitude& pooled, const Vector& u_hat, const LayerModel& model,
                                const HyperParams& hp, const std::optional<CauseVector>& u_init = std::nullopt);

struct TopDownPrediction {
  Vector u_hat;  // prediction for the lower layer's cause (length = upper P)
  Vector x_hat;  // gated upper-layer state prediction (length = upper K)
};

// x_hat_k = (A x_prev)_k where lambda > gamma (1 + exp(-(B u)_k)), else 0;
// u_hat = C x_hat. Constants come from the upper layer.
TopDownPrediction top_down_prediction(const LayerModel& upper_model, const StateVector& upper_x_prev,
                                      const CauseVector& upper_u, const HyperParams& upper_hp);

}  // namespace mmdpcn
