#include "mmdpcn/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "mmdpcn/errors.hpp"
#include "mmdpcn/majorizer.hpp"
#include "mmdpcn/state_infer.hpp"

namespace mmdpcn {

namespace {

using Clock = std::chrono::steady_clock;

struct Problem {
  const Vector& y;
  const Matrix& c;
  const HyperParams& hp;
  Vector prediction;  // A x_prev, empty without a temporal term
  const Vector* prev = nullptr;
  const LayerModel& model;

  // gradient of 0.5||y - Cx||^2 + lambda f_s(x - A x_prev)
  Vector smooth_grad(const Vector& x) const {
    Vector g = matvec_t(c, matvec(c, x) - y);
    if (!prediction.empty()) g += hp.lambda * soft_clip(x - prediction, hp.m_smooth);
    return g;
  }

  double objective(const Vector& x) const { return state_objective(y, x, prev, model, hp); }
};

Problem make_problem(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp) {
  require(y.size() == model.c.rows(), ErrorKind::DimensionMismatch, "baseline: patch length != P");
  Problem p{y, model.c, hp, Vector(), nullptr, model};
  if (x_prev != nullptr) {
    require(x_prev->size() == model.c.cols(), ErrorKind::DimensionMismatch, "baseline: previous state length");
    p.prev = &x_prev->values;
    if (hp.lambda > 0.0) p.prediction = matvec(model.a, x_prev->values);
  }
  return p;
}

Vector shrink(const Vector& v, double t) {
  Vector out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double a = std::abs(v[k]) - t;
    out[k] = a > 0.0 ? std::copysign(a, v[k]) : 0.0;
  }
  return out;
}

bool settled(double f_old, double f_new, double tol) {
  if (tol <= 0.0) return false;
  return std::abs(f_old - f_new) <= tol * std::abs(f_new);
}

void record(SolveTrace& trace, double f, const Vector& x, double threshold) {
  trace.objective_per_iter.push_back(f);
  trace.sparsity_per_iter.push_back(zero_percent(x.span(), threshold));
}

StateVector start_point(const std::optional<StateVector>& x_init, std::size_t k, double fill) {
  StateVector s = x_init ? *x_init : StateVector::filled(k, fill);
  require(s.size() == k, ErrorKind::DimensionMismatch, "baseline: initial state length != K");
  return s;
}

void finish(BaselineResult& r, const Problem& p, Clock::time_point t0) {
  require(all_finite(r.state.values.span()), ErrorKind::NonFinite, "baseline: iterate is not finite");
  r.raw_sparsity = zero_percent(r.state.values.span());
  r.state = StateVector(r.state.values);
  r.trace.kkt_residual = state_kkt_residual(p.y, r.state.values, p.prev, p.model, p.hp);
  r.trace.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string_view to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::Ista: return "ista";
    case BaselineMethod::Fista: return "fista";
    case BaselineMethod::Adam: return "adam";
  }
  return "?";
}

BaselineMethod parse_baseline_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "ista") return BaselineMethod::Ista;
  if (lower == "fista") return BaselineMethod::Fista;
  if (lower == "adam") return BaselineMethod::Adam;
  fail(ErrorKind::InvalidArgument, "unknown baseline method '" + std::string(name) + "'");
}

void BaselineConfig::validate() const {
  require(step > 0.0, ErrorKind::ConfigError, "baseline step must be positive");
  require(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0,
          ErrorKind::ConfigError, "adam parameters must lie in (0, 1)");
  require(max_iter >= 1 && tol >= 0.0, ErrorKind::ConfigError, "invalid baseline budget");
}

double lipschitz_constant(const Matrix& c, std::size_t iters) {
  Vector v(c.cols(), 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(c.cols(), 1))));
  double lambda = 0.0;
  for (std::size_t i = 0; i < iters; ++i) {
    Vector w = matvec_t(c, matvec(c, v));
    const double n = norm2(w);
    if (n == 0.0) return 0.0;
    lambda = n;
    v = (1.0 / n) * w;
  }
  return lambda;
}

BaselineResult ista_solve(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp,
                          const BaselineConfig& cfg, const std::optional<StateVector>& x_init) {
  cfg.validate();
  const auto t0 = Clock::now();
  const Problem p = make_problem(y, x_prev, model, hp);
  BaselineResult r{start_point(x_init, model.c.cols(), 0.0), {}, 0.0};
  Vector x = r.state.values;
  double f = p.objective(x);
  record(r.trace, f, x, hp.clamp_state);
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    Vector next = shrink(x - cfg.step * p.smooth_grad(x), cfg.step * hp.mu);
    require(all_finite(next.span()), ErrorKind::NonFinite, "ista: iterate is not finite");
    const double f_next = p.objective(next);
    record(r.trace, f_next, next, hp.clamp_state);
    r.trace.iterations = it + 1;
    const bool done = settled(f, f_next, cfg.tol);
    x = std::move(next);
    f = f_next;
    if (done) {
      r.trace.converged = true;
      break;
    }
  }
  r.state.values = x;
  finish(r, p, t0);
  return r;
}

BaselineResult fista_solve(const Vector& y, const StateVector* x_prev, const LayerModel& model,
                           const HyperParams& hp, const BaselineConfig& cfg, const std::optional<StateVector>& x_init) {
  cfg.validate();
  const auto t0 = Clock::now();
  const Problem p = make_problem(y, x_prev, model, hp);
  BaselineResult r{start_point(x_init, model.c.cols(), 0.0), {}, 0.0};
  Vector x = r.state.values;
  Vector z = x;
  double t = 1.0;
  double f = p.objective(x);
  record(r.trace, f, x, hp.clamp_state);
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    Vector next = shrink(z - cfg.step * p.smooth_grad(z), cfg.step * hp.mu);
    require(all_finite(next.span()), ErrorKind::NonFinite, "fista: iterate is not finite");
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / t_next) * (next - x);
    t = t_next;
    const double f_next = p.objective(next);
    record(r.trace, f_next, next, hp.clamp_state);
    r.trace.iterations = it + 1;
    const bool done = settled(f, f_next, cfg.tol);
    x = std::move(next);
    f = f_next;
    if (done) {
      r.trace.converged = true;
      break;
    }
  }
  r.state.values = x;
  finish(r, p, t0);
  return r;
}

BaselineResult adam_solve(const Vector& y, const StateVector* x_prev, const LayerModel& model, const HyperParams& hp,
                          const BaselineConfig& cfg, const std::optional<StateVector>& x_init) {
  cfg.validate();
  const auto t0 = Clock::now();
  const Problem p = make_problem(y, x_prev, model, hp);
  const std::size_t k = model.c.cols();
  BaselineResult r{start_point(x_init, k, kDefaultStateInit), {}, 0.0};
  Vector x = r.state.values;
  Vector m1(k), m2(k);
  double b1t = 1.0, b2t = 1.0;
  double f = p.objective(x);
  record(r.trace, f, x, hp.clamp_state);
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    const Vector g = p.smooth_grad(x) + hp.mu * soft_clip(x, hp.m_smooth);
    b1t *= cfg.adam_beta1;
    b2t *= cfg.adam_beta2;
    Vector next = x;
    for (std::size_t j = 0; j < k; ++j) {
      m1[j] = cfg.adam_beta1 * m1[j] + (1.0 - cfg.adam_beta1) * g[j];
      m2[j] = cfg.adam_beta2 * m2[j] + (1.0 - cfg.adam_beta2) * g[j] * g[j];
      const double mh = m1[j] / (1.0 - b1t);
      const double vh = m2[j] / (1.0 - b2t);
      next[j] -= cfg.step * mh / (std::sqrt(vh) + cfg.adam_eps);
    }
    require(all_finite(next.span()), ErrorKind::NonFinite, "adam: iterate is not finite");
    const double f_next = p.objective(next);
    record(r.trace, f_next, next, hp.clamp_state);
    r.trace.iterations = it + 1;
    const bool done = settled(f, f_next, cfg.tol);
    x = std::move(next);
    f = f_next;
    if (done) {
      r.trace.converged = true;
      break;
    }
  }
  r.state.values = x;
  const double raw = zero_percent(x.span());
  r.state.clamp(hp.clamp_state);
  // The last entry describes the returned (clamped) point.
  r.trace.objective_per_iter.back() = p.objective(r.state.values);
  r.trace.sparsity_per_iter.back() = zero_percent(r.state.values.span(), hp.clamp_state);
  finish(r, p, t0);
  r.raw_sparsity = raw;
  return r;
}

BaselineResult baseline_solve(const Vector& y, const StateVector* x_prev, const LayerModel& model,
                              const HyperParams& hp, const BaselineConfig& cfg,
                              const std::optional<StateVector>& x_init) {
  switch (cfg.method) {
    case BaselineMethod::Ista: return ista_solve(y, x_prev, model, hp, cfg, x_init);
    case BaselineMethod::Fista: return fista_solve(y, x_prev, model, hp, cfg, x_init);
    case BaselineMethod::Adam: return adam_solve(y, x_prev, model, hp, cfg, x_init);
  }
  fail(ErrorKind::InvalidArgument, "unknown baseline method");
}

}  // namespace mmdpcn
