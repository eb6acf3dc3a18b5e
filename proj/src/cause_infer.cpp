#include "mmdpcn/cause_infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mmdpcn/errors.hpp"

namespace mmdpcn {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kMinStep = 1.0 / 1048576.0;

// B^T (|X| . exp(-B u))
Vector drive(const Vector& u, const Vector& pooled, const Matrix& b) {
  const Vector bu = matvec(b, u);
  Vector w(pooled.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = pooled[k] * guarded_exp_neg(bu[k]);
  return matvec_t(b, w);
}

CauseResult run(const Vector& pooled, const Vector* u_hat, const LayerModel& model, const HyperParams& hp,
                const CauseVector& start, std::size_t max_iter) {
  const auto t0 = Clock::now();
  const Matrix& b = model.b;
  const std::size_t d = b.cols();
  require(pooled.size() == b.rows(), ErrorKind::DimensionMismatch, "infer_cause: pooled length != K");
  require(start.size() == d, ErrorKind::DimensionMismatch, "infer_cause: initial cause length != D");
  if (u_hat != nullptr) require(u_hat->size() == d, ErrorKind::DimensionMismatch, "infer_cause: u_hat length != D");
  if (max_iter == 0) max_iter = hp.max_inner_iter;

  CauseResult out{start, {}};
  CauseVector& u = out.cause;
  u.clamped_mask.resize(d, false);
  SolveTrace& trace = out.trace;

  auto objective = [&](const Vector& v) { return cause_objective(v, pooled, b, hp.beta, u_hat); };
  double f = objective(u.values);
  trace.objective_per_iter.push_back(f);
  trace.sparsity_per_iter.push_back(zero_percent(u.values.span()));

  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector g = drive(u.values, pooled, b);
    Vector proposal(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double a = std::abs(u.values[j]);
      if (a == 0.0) continue;
      proposal[j] = u_hat != nullptr ? a / (a + hp.beta) * ((*u_hat)[j] + g[j]) : a / hp.beta * g[j];
    }
    require(all_finite(proposal.span()), ErrorKind::NonFinite, "infer_cause: iterate is not finite");

    double tau = 1.0;
    Vector next = proposal;
    double f_next = objective(next);
    while (f_next > f && tau > kMinStep) {
      tau *= 0.5;
      for (std::size_t j = 0; j < d; ++j) next[j] = u.values[j] + tau * (proposal[j] - u.values[j]);
      f_next = objective(next);
    }
    const bool stalled = f_next > f;
    if (stalled) {
      next = u.values;
      f_next = f;
    }

    CauseVector candidate{u};
    candidate.values = next;
    candidate.clamp(hp.clamp_cause);
    if (candidate.values != next) {
      const double f_clamped = objective(candidate.values);
      if (f_clamped > f_next + 1e-12) {
        candidate.values = next;
        for (std::size_t j = 0; j < d; ++j) candidate.clamped_mask[j] = u.clamped_mask[j] || next[j] == 0.0;
      } else {
        f_next = f_clamped;
      }
    }

    u = std::move(candidate);
    trace.objective_per_iter.push_back(f_next);
    trace.sparsity_per_iter.push_back(zero_percent(u.values.span()));
    trace.iterations = it + 1;

    const bool empty_support = std::all_of(u.values.begin(), u.values.end(), [](double v) { return v == 0.0; });
    const double change = std::abs(f - f_next);
    f = f_next;
    if (stalled || empty_support || change <= hp.inner_tol * std::abs(f)) {
      trace.converged = true;
      break;
    }
  }

  trace.kkt_residual = cause_kkt_residual(u.values, pooled, b, hp.beta, u_hat);
  trace.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

}  // namespace

double cause_objective(const Vector& u, const Vector& pooled, const Matrix& b, double beta, const Vector* u_hat) {
  double f = eval_Eu(u, pooled, b, beta);
  if (u_hat != nullptr) {
    require(u_hat->size() == u.size(), ErrorKind::DimensionMismatch, "cause_objective: u_hat length");
    const Vector diff = u - *u_hat;
    f += 0.5 * dot(diff, diff);
  }
  return f;
}

double cause_kkt_residual(const Vector& u, const Vector& pooled, const Matrix& b, double beta, const Vector* u_hat) {
  const Vector g = drive(u, pooled, b);
  double worst = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (u[j] == 0.0) continue;
    double r = beta * (u[j] > 0.0 ? 1.0 : -1.0) - g[j];
    if (u_hat != nullptr) r += u[j] - (*u_hat)[j];
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

CauseResult infer_cause(const PooledStateMagnitude& pooled, const LayerModel& model, const HyperParams& hp,
                        const CauseVector& start, std::size_t max_iter) {
  return run(pooled.xt_abs, nullptr, model, hp, start, max_iter);
}

CauseResult infer_cause(const PooledStateMagnitude& pooled, const LayerModel& model, const HyperParams& hp,
                        const std::optional<CauseVector>& u_init) {
  const CauseVector start = u_init ? *u_init : CauseVector::filled(model.b.cols(), kDefaultCauseInit);
  return run(pooled.xt_abs, nullptr, model, hp, start, 0);
}

CauseResult infer_cause_topdown(const PooledStateMagnitude& pooled, const Vector& u_hat, const LayerModel& model,
                                const HyperParams& hp, const CauseVector& start, std::size_t max_iter) {
  return run(pooled.xt_abs, &u_hat, model, hp, start, max_iter);
}

CauseResult infer_cause_topdown(const PooledStateMagnitude& pooled, const Vector& u_hat, const LayerModel& model,
                                const HyperParams& hp, const std::optional<CauseVector>& u_init) {
  const CauseVector start = u_init ? *u_init : CauseVector::filled(model.b.cols(), kDefaultCauseInit);
  return run(pooled.xt_abs, &u_hat, model, hp, start, 0);
}

TopDownPrediction top_down_prediction(const LayerModel& upper_model, const StateVector& upper_x_prev,
                                      const CauseVector& upper_u, const HyperParams& upper_hp) {
  const std::size_t k = upper_model.a.rows();
  require(upper_x_prev.size() == k && upper_u.size() == upper_model.b.cols(), ErrorKind::DimensionMismatch,
          "top_down_prediction shapes");
  const Vector ax = matvec(upper_model.a, upper_x_prev.values);
  const Vector bu = matvec(upper_model.b, upper_u.values);
  TopDownPrediction out{Vector(), Vector(k)};
  for (std::size_t j = 0; j < k; ++j)
    if (upper_hp.lambda > upper_hp.gamma * (1.0 + guarded_exp_neg(bu[j]))) out.x_hat[j] = ax[j];
  out.u_hat = matvec(upper_model.c, out.x_hat);
  return out;
}

}  // namespace mmdpcn
