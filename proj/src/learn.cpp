#include "mmdpcn/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "mmdpcn/errors.hpp"

namespace mmdpcn {

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kMaxHalvings = 20;

double sequence_objective(std::span<const PatchBatch> frames, const std::vector<FrameVariables>& vars,
                          const LayerModel& model, const HyperParams& hp) {
  double total = 0.0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::span<const StateVector> prev;
    if (t > 0) prev = vars[t - 1].states;
    total += smoothed_Ep(frames[t], vars[t].states, prev, vars[t].cause, model, hp);
  }
  return total;
}

}  // namespace

void LearnConfig::validate() const {
  require(lr_a > 0.0 && lr_b > 0.0 && lr_c > 0.0, ErrorKind::ConfigError, "learning rates must be positive");
  require(theta_prox >= 0.0, ErrorKind::ConfigError, "theta_prox must be nonnegative");
  require(outer_tol > 0.0 && max_outer_iter >= 1, ErrorKind::ConfigError, "invalid outer loop settings");
}

double smoothed_Ep(const PatchBatch& batch, std::span<const StateVector> states,
                   std::span<const StateVector> prev_states, const CauseVector& cause, const LayerModel& model,
                   const HyperParams& hp) {
  require(states.size() == batch.size(), ErrorKind::DimensionMismatch, "smoothed_Ep: one state per patch");
  require(prev_states.empty() || prev_states.size() == batch.size(), ErrorKind::DimensionMismatch,
          "smoothed_Ep: one previous state per patch");
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const Vector* prev = prev_states.empty() ? nullptr : &prev_states[n].values;
    total += state_objective(batch.patches[n], states[n].values, prev, model, hp);
  }
  const auto pooled = PooledStateMagnitude::from_states(states, hp.gamma);
  return total + eval_Eu(cause, pooled, model, hp);
}

ModelGrads grad_model(const PatchBatch& batch, std::span<const StateVector> states,
                      std::span<const StateVector> prev_states, const CauseVector& cause,
                      const PooledStateMagnitude& pooled, const LayerModel& model, const HyperParams& hp) {
  const std::size_t k = model.c.cols();
  require(states.size() == batch.size(), ErrorKind::DimensionMismatch, "grad_model: one state per patch");
  require(prev_states.empty() || prev_states.size() == batch.size(), ErrorKind::DimensionMismatch,
          "grad_model: one previous state per patch");
  require(pooled.xt_abs.size() == k && cause.size() == model.b.cols(), ErrorKind::DimensionMismatch,
          "grad_model: cause shapes");

  ModelGrads g{Matrix(k, k), Matrix(k, model.b.cols()), Matrix(model.c.rows(), k)};
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const Vector& x = states[n].values;
    require(x.size() == k && batch.patches[n].size() == model.c.rows(), ErrorKind::DimensionMismatch,
            "grad_model: state/patch length");
    add_outer(g.dc, -1.0, batch.patches[n] - matvec(model.c, x), x);
    if (!prev_states.empty() && hp.lambda > 0.0) {
      const Vector& xp = prev_states[n].values;
      const Vector alpha = soft_clip(x - matvec(model.a, xp), hp.m_smooth);
      add_outer(g.da, -hp.lambda, alpha, xp);
    }
  }
  const Vector bu = matvec(model.b, cause.values);
  Vector w(k);
  for (std::size_t j = 0; j < k; ++j) w[j] = pooled.xt_abs[j] * guarded_exp_neg(bu[j]);
  add_outer(g.db, -1.0, w, cause.values);
  return g;
}

void accumulate(ModelGrads& total, const ModelGrads& g) {
  if (total.da.rows() == 0) {
    total = g;
    return;
  }
  total.da = total.da + g.da;
  total.db = total.db + g.db;
  total.dc = total.dc + g.dc;
}

LayerModel update_model(const LayerModel& model, const ModelGrads& grads, const LearnConfig& cfg,
                        const LayerModel& model_prev) {
  require(grads.da.rows() == model.a.rows() && grads.da.cols() == model.a.cols() &&
              grads.db.rows() == model.b.rows() && grads.db.cols() == model.b.cols() &&
              grads.dc.rows() == model.c.rows() && grads.dc.cols() == model.c.cols(),
          ErrorKind::DimensionMismatch, "update_model: gradient shapes");
  model_prev.check(model.dims());
  auto step = [&](const Matrix& theta, const Matrix& grad, const Matrix& prev, double lr) {
    Matrix out = theta;
    for (std::size_t i = 0; i < out.values().size(); ++i) {
      const double g = grad.data()[i] + cfg.theta_prox * (theta.data()[i] - prev.data()[i]);
      out.data()[i] -= lr * g;
    }
    return out;
  };
  LayerModel out;
  out.a = step(model.a, grads.da, model_prev.a, cfg.lr_a);
  out.b = column_normalize(step(model.b, grads.db, model_prev.b, cfg.lr_b));
  out.c = column_normalize(step(model.c, grads.dc, model_prev.c, cfg.lr_c));
  return out;
}

FrameVariables infer_frame(const PatchBatch& batch, std::span<const StateVector> prev_states,
                           const LayerModel& model, const HyperParams& hp, const WoodburySolver& solver,
                           const Vector* u_hat, bool parallel) {
  const std::size_t n = batch.size();
  require(n > 0, ErrorKind::EmptyVector, "infer_frame: empty batch");
  require(prev_states.empty() || prev_states.size() == n, ErrorKind::DimensionMismatch,
          "infer_frame: one previous state per patch");

  FrameVariables out;
  out.states.assign(n, StateVector::filled(model.c.cols(), kDefaultStateInit));
  out.cause = CauseVector::filled(model.b.cols(), kDefaultCauseInit);
  std::vector<char> state_done(n, 0);

  const std::size_t blocks = std::max((hp.max_inner_iter + hp.i_s - 1) / hp.i_s,
                                      (hp.max_inner_iter + hp.j_s - 1) / hp.j_s);
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < n; ++i)
      if (!state_done[i]) index.push_back(i);
    const bool states_moved = !index.empty();

    std::vector<std::size_t> iters(index.size(), 0);
    auto step_patch = [&](std::size_t j) {
      const std::size_t i = index[j];
      const StateVector* p = prev_states.empty() ? nullptr : &prev_states[i];
      StateResult r = infer_state(batch.patches[i], p, model, hp, solver, out.states[i], hp.i_s);
      out.states[i] = std::move(r.state);
      state_done[i] = r.trace.converged ? 1 : 0;
      iters[j] = r.trace.iterations;
    };
    const std::size_t workers =
        parallel ? std::min<std::size_t>(index.size(), std::thread::hardware_concurrency()) : 1;
    if (workers > 1) {
      std::vector<std::exception_ptr> errors(workers);
      {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
          pool.emplace_back([&, w] {
            try {
              for (std::size_t j = w; j < index.size(); j += workers) step_patch(j);
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
      }
      for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    } else {
      for (std::size_t j = 0; j < index.size(); ++j) step_patch(j);
    }
    if (!iters.empty()) out.state_iterations += *std::max_element(iters.begin(), iters.end());

    const auto pooled = PooledStateMagnitude::from_states(out.states, hp.gamma);
    CauseResult c = u_hat != nullptr ? infer_cause_topdown(pooled, *u_hat, model, hp, out.cause, hp.j_s)
                                     : infer_cause(pooled, model, hp, out.cause, hp.j_s);
    out.cause = std::move(c.cause);
    out.cause_iterations += c.trace.iterations;
    if (!states_moved && c.trace.converged) {
      out.converged = true;
      break;
    }
  }
  return out;
}

std::vector<CauseVector> FitResult::causes() const {
  std::vector<CauseVector> out;
  out.reserve(variables.size());
  for (const auto& v : variables) out.push_back(v.cause);
  return out;
}

std::vector<FrameVariables> infer_sequence(std::span<const PatchBatch> frames, const LayerModel& model,
                                           const HyperParams& hp, bool parallel) {
  const WoodburySolver solver(model.c);
  std::vector<FrameVariables> vars;
  vars.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::span<const StateVector> prev;
    if (t > 0) prev = vars[t - 1].states;
    vars.push_back(infer_frame(frames[t], prev, model, hp, solver, nullptr, parallel));
  }
  return vars;
}

FitResult fit_layer(std::span<const PatchBatch> frames, const LayerDims& dims, const HyperParams& hp,
                    const LearnConfig& cfg, const std::optional<LayerModel>& init) {
  const auto t0 = Clock::now();
  require(!frames.empty(), ErrorKind::EmptyVector, "fit_layer: no frames");
  dims.validate();
  hp.validate();
  cfg.validate();
  for (const auto& f : frames) {
    require(f.size() == dims.n, ErrorKind::DimensionMismatch, "fit_layer: patch count differs from dims.n");
    for (const auto& p : f.patches)
      require(p.size() == dims.p, ErrorKind::DimensionMismatch, "fit_layer: patch length differs from dims.p");
  }

  FitResult out;
  out.model = init ? *init : LayerModel::random(dims, cfg.seed);
  out.model.check(dims);
  out.variables = infer_sequence(frames, out.model, hp);
  double ep = sequence_objective(frames, out.variables, out.model, hp);
  out.report.ep_trace.push_back(ep);

  LearnConfig step_cfg = cfg;
  LayerModel previous = out.model;
  int halvings = 0;
  for (std::size_t outer = 0; outer < cfg.max_outer_iter; ++outer) {
    out.report.outer_iterations = outer + 1;
    ModelGrads grads;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      std::span<const StateVector> prev;
      if (t > 0) prev = out.variables[t - 1].states;
      const auto pooled = PooledStateMagnitude::from_states(out.variables[t].states, hp.gamma);
      accumulate(grads, grad_model(frames[t], out.variables[t].states, prev, out.variables[t].cause, pooled,
                                   out.model, hp));
    }

    LayerModel candidate = update_model(out.model, grads, step_cfg, previous);
    std::vector<FrameVariables> vars = infer_sequence(frames, candidate, hp);
    const double ep_next = sequence_objective(frames, vars, candidate, hp);
    if (!(ep_next <= ep)) {
      ++out.report.rejected_steps;
      step_cfg.lr_a *= 0.5;
      step_cfg.lr_b *= 0.5;
      step_cfg.lr_c *= 0.5;
      if (++halvings > kMaxHalvings) {
        out.report.converged = true;
        break;
      }
      continue;
    }

    previous = std::move(out.model);
    out.model = std::move(candidate);
    out.variables = std::move(vars);
    out.report.ep_trace.push_back(ep_next);
    const double change = std::abs(ep - ep_next);
    ep = ep_next;
    if (change <= cfg.outer_tol * std::max(std::abs(ep), 1e-300)) {
      out.report.converged = true;
      break;
    }
  }
  out.report.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

}  // namespace mmdpcn
