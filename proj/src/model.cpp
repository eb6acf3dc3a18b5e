#include "mmdpcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mmdpcn/errors.hpp"

namespace mmdpcn {

void HyperParams::validate() const {
  require(mu > 0.0 && gamma > 0.0 && beta > 0.0, ErrorKind::ConfigError, "mu, gamma and beta must be positive");
  require(lambda >= 0.0, ErrorKind::ConfigError, "lambda must be nonnegative");
  require(m_smooth > 0.0, ErrorKind::ConfigError, "m_smooth must be positive");
  require(clamp_state >= 0.0 && clamp_cause >= 0.0, ErrorKind::ConfigError, "clamp thresholds must be nonnegative");
  require(i_s >= 1 && j_s >= 1, ErrorKind::ConfigError, "i_s and j_s must be at least 1");
  require(inner_tol > 0.0 && max_inner_iter >= 1, ErrorKind::ConfigError, "invalid inner solver settings");
}

void LayerDims::validate() const {
  require(p > 0 && k > 0 && d > 0 && n > 0, ErrorKind::ConfigError, "layer dimensions must be positive");
  require(p < k, ErrorKind::ConfigError,
          "dictionary must be overcomplete (p=" + std::to_string(p) + ", k=" + std::to_string(k) + ")");
}

void LayerModel::check(const LayerDims& d) const {
  require(a.rows() == d.k && a.cols() == d.k, ErrorKind::DimensionMismatch, "A must be K x K");
  require(b.rows() == d.k && b.cols() == d.d, ErrorKind::DimensionMismatch, "B must be K x D");
  require(c.rows() == d.p && c.cols() == d.k, ErrorKind::DimensionMismatch, "C must be P x K");
}

LayerModel LayerModel::random(const LayerDims& dims, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    for (std::size_t i = 0; i < rows * cols; ++i) m.data()[i] = normal(rng) * scale;
    return m;
  };
  LayerModel model;
  model.a = draw(dims.k, dims.k);
  model.b = column_normalize(draw(dims.k, dims.d));
  model.c = column_normalize(draw(dims.p, dims.k));
  return model;
}

PooledStateMagnitude PooledStateMagnitude::from_states(std::span<const StateVector> states, double gamma) {
  require(!states.empty(), ErrorKind::EmptyVector, "pooling needs at least one state");
  PooledStateMagnitude pooled{Vector(states.front().size())};
  for (const auto& s : states) {
    require(s.size() == pooled.xt_abs.size(), ErrorKind::DimensionMismatch, "pooled states differ in length");
    for (std::size_t k = 0; k < s.size(); ++k) pooled.xt_abs[k] += std::abs(s.values[k]);
  }
  for (double& v : pooled.xt_abs) v *= gamma;
  return pooled;
}

double guarded_exp_neg(double z) { return std::exp(-std::clamp(z, -700.0, 700.0)); }

double eval_Ex_patch(const Vector& y, const Vector& x, const Vector* x_prev, const LayerModel& model,
                     const HyperParams& hp) {
  require(y.size() == model.c.rows() && x.size() == model.c.cols(), ErrorKind::DimensionMismatch,
          "eval_Ex patch/state length");
  const Vector residual = y - matvec(model.c, x);
  double e = 0.5 * dot(residual, residual) + hp.mu * norm1(x);
  if (x_prev != nullptr && hp.lambda != 0.0) {
    require(x_prev->size() == x.size(), ErrorKind::DimensionMismatch, "eval_Ex previous state length");
    e += hp.lambda * norm1(x - matvec(model.a, *x_prev));
  }
  return e;
}

double eval_Ex(const PatchBatch& batch, std::span<const StateVector> states,
               std::span<const StateVector> prev_states, const LayerModel& model, const HyperParams& hp) {
  require(states.size() == batch.size(), ErrorKind::DimensionMismatch, "eval_Ex: one state per patch");
  require(prev_states.empty() || prev_states.size() == batch.size(), ErrorKind::DimensionMismatch,
          "eval_Ex: one previous state per patch");
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const Vector* prev = prev_states.empty() ? nullptr : &prev_states[n].values;
    total += eval_Ex_patch(batch.patches[n], states[n].values, prev, model, hp);
  }
  return total;
}

double eval_Eu(const Vector& u, const Vector& pooled, const Matrix& b, double beta) {
  require(b.cols() == u.size() && b.rows() == pooled.size(), ErrorKind::DimensionMismatch, "eval_Eu shapes");
  const Vector bu = matvec(b, u);
  double e = 0.0;
  for (std::size_t k = 0; k < pooled.size(); ++k) e += pooled[k] * (1.0 + guarded_exp_neg(bu[k]));
  return e + beta * norm1(u);
}

double eval_Eu(const CauseVector& cause, const PooledStateMagnitude& pooled, const LayerModel& model,
               const HyperParams& hp) {
  return eval_Eu(cause.values, pooled.xt_abs, model.b, hp.beta);
}

double eval_Ep(const PatchBatch& batch, std::span<const StateVector> states,
               std::span<const StateVector> prev_states, const CauseVector& cause, const LayerModel& model,
               const HyperParams& hp) {
  const auto pooled = PooledStateMagnitude::from_states(states, hp.gamma);
  return eval_Ex(batch, states, prev_states, model, hp) + eval_Eu(cause, pooled, model, hp);
}

}  // namespace mmdpcn
