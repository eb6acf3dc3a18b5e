#include "mmdpcn/state_infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "mmdpcn/errors.hpp"

namespace mmdpcn {

namespace {

using Clock = std::chrono::steady_clock;

bool temporal_active(const Vector* x_prev, const HyperParams& hp) { return x_prev != nullptr && hp.lambda > 0.0; }

}  // namespace

double state_objective(const Vector& y, const Vector& x, const Vector* x_prev, const LayerModel& model,
                       const HyperParams& hp) {
  require(y.size() == model.c.rows() && x.size() == model.c.cols(), ErrorKind::DimensionMismatch,
          "state_objective lengths");
  const Vector residual = y - matvec(model.c, x);
  double f = 0.5 * dot(residual, residual) + hp.mu * norm1(x);
  if (temporal_active(x_prev, hp)) f += hp.lambda * smooth_l1(x - matvec(model.a, *x_prev), hp.m_smooth);
  return f;
}

double state_kkt_residual(const Vector& y, const Vector& x, const Vector* x_prev, const LayerModel& model,
                          const HyperParams& hp) {
  Vector grad = matvec_t(model.c, matvec(model.c, x) - y);
  if (temporal_active(x_prev, hp)) grad += hp.lambda * soft_clip(x - matvec(model.a, *x_prev), hp.m_smooth);
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] == 0.0) continue;
    worst = std::max(worst, std::abs(grad[k] + hp.mu * (x[k] > 0.0 ? 1.0 : -1.0)));
  }
  return worst;
}

StateResult infer_state(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp,
                        const WoodburySolver& solver, const StateVector& start, std::size_t max_iter) {
  const auto t0 = Clock::now();
  const std::size_t k = model.c.cols();
  require(y.size() == model.c.rows(), ErrorKind::DimensionMismatch, "infer_state: patch length != P");
  require(start.size() == k, ErrorKind::DimensionMismatch, "infer_state: initial state length != K");
  if (x_prev != nullptr)
    require(x_prev->size() == k, ErrorKind::DimensionMismatch, "infer_state: previous state length != K");
  if (max_iter == 0) max_iter = hp.max_inner_iter;

  const Vector* prev = x_prev != nullptr ? &x_prev->values : nullptr;
  const bool temporal = temporal_active(prev, hp);
  const Vector prediction = temporal ? matvec(model.a, *prev) : Vector();
  const double curvature = temporal ? hp.lambda / hp.m_smooth : 0.0;
  const Vector cty = matvec_t(model.c, y);

  StateResult out{start, {}};
  StateVector& x = out.state;
  x.clamped_mask.resize(k, false);
  SolveTrace& trace = out.trace;

  double f = state_objective(y, x.values, prev, model, hp);
  trace.objective_per_iter.push_back(f);
  trace.sparsity_per_iter.push_back(zero_percent(x.values.span()));

  for (std::size_t it = 0; it < max_iter; ++it) {
    const ReweightDiagonal r = reweight(x.values, hp.mu, curvature);
    Vector rhs = cty;
    if (temporal) {
      const Vector alpha = soft_clip(x.values - prediction, hp.m_smooth);
      for (std::size_t j = 0; j < k; ++j) rhs[j] += curvature * x.values[j] - hp.lambda * alpha[j];
    }
    Vector next = solver.apply(r, rhs);
    require(all_finite(next.span()), ErrorKind::NonFinite, "infer_state: iterate is not finite");

    StateVector candidate{x};
    candidate.values = next;
    candidate.clamp(hp.clamp_state);
    double f_next = state_objective(y, candidate.values, prev, model, hp);
    if (candidate.values != next) {
      // Clamping a component still travelling toward a nonzero optimum can
      // raise F; postpone the clamp in that case.
      const double f_raw = state_objective(y, next, prev, model, hp);
      if (f_next > f_raw + 1e-12) {
        candidate.values = next;
        for (std::size_t j = 0; j < k; ++j) candidate.clamped_mask[j] = x.clamped_mask[j] || next[j] == 0.0;
        f_next = f_raw;
      }
    }

    x = std::move(candidate);
    trace.objective_per_iter.push_back(f_next);
    trace.sparsity_per_iter.push_back(zero_percent(x.values.span()));
    trace.iterations = it + 1;

    const bool empty_support = std::all_of(x.values.begin(), x.values.end(), [](double v) { return v == 0.0; });
    const double change = std::abs(f - f_next);
    f = f_next;
    if (empty_support || change <= hp.inner_tol * std::abs(f)) {
      trace.converged = true;
      break;
    }
  }

  trace.kkt_residual = state_kkt_residual(y, x.values, prev, model, hp);
  trace.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

StateResult infer_state(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp,
                        const std::optional<StateVector>& x_init) {
  const WoodburySolver solver(model.c);
  const StateVector start = x_init ? *x_init : StateVector::filled(model.c.cols(), kDefaultStateInit);
  return infer_state(y, x_prev, model, hp, solver, start);
}

BatchStateResult infer_states_batch(const PatchBatch& batch, std::span<const StateVector> prev,
                                    const LayerModel& model, const HyperParams& hp, const WoodburySolver& solver,
                                    bool parallel) {
  const std::size_t n = batch.size();
  require(prev.empty() || prev.size() == n, ErrorKind::DimensionMismatch,
          "infer_states_batch: one previous state per patch");
  BatchStateResult out;
  out.states.resize(n);
  out.traces.resize(n);
  const StateVector start = StateVector::filled(model.c.cols(), kDefaultStateInit);

  auto run = [&](std::size_t i) {
    const StateVector* p = prev.empty() ? nullptr : &prev[i];
    StateResult r = infer_state(batch.patches[i], p, model, hp, solver, start);
    out.states[i] = std::move(r.state);
    out.traces[i] = std::move(r.trace);
  };

  const std::size_t workers = parallel ? std::min<std::size_t>(n, std::thread::hardware_concurrency()) : 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) run(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

BatchStateResult infer_states_batch(const PatchBatch& batch, std::span<const StateVector> prev,
                                    const LayerModel& model, const HyperParams& hp, bool parallel) {
  const WoodburySolver solver(model.c);
  return infer_states_batch(batch, prev, model, hp, solver, parallel);
}

}  // namespace mmdpcn
