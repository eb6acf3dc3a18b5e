#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mmdpcn/learn.hpp"
#include "mmdpcn/synthetic.hpp"

using namespace mmdpcn;

namespace {

Vector gaussian(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (auto& e : v) e = g(rng);
  return v;
}

Matrix gaussian(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

struct Instance {
  LayerModel model;
  PatchBatch batch;
  std::vector<StateVector> states, prev;
  CauseVector cause;
  HyperParams hp;
};

Instance random_instance(std::mt19937_64& rng, int t) {
  Instance in;
  const std::size_t p = 3 + t % 3, k = p + 2 + t % 4, d = 1 + t % 3, n = 1 + t % 3;
  // Unnormalized entries so every gradient component is generic.
  in.model = {gaussian(k, k, rng), gaussian(k, d, rng), gaussian(p, k, rng)};
  in.hp.mu = 0.2;
  in.hp.lambda = 0.3;
  in.hp.gamma = 0.5;
  in.hp.beta = 0.1;
  in.hp.m_smooth = 0.5;
  for (std::size_t i = 0; i < n; ++i) {
    in.batch.patches.push_back(gaussian(p, rng));
    in.states.emplace_back(gaussian(k, rng));
    in.prev.emplace_back(gaussian(k, rng));
  }
  in.cause = CauseVector(gaussian(d, rng, 0.5));
  return in;
}

double ep(const Instance& in, const LayerModel& m) {
  return smoothed_Ep(in.batch, in.states, in.prev, in.cause, m, in.hp);
}

double fd_error(const Instance& in, Matrix LayerModel::*field, const Matrix& analytic) {
  const double h = 1e-6;
  Matrix fd(analytic.rows(), analytic.cols());
  for (std::size_t i = 0; i < fd.rows(); ++i)
    for (std::size_t j = 0; j < fd.cols(); ++j) {
      LayerModel plus = in.model, minus = in.model;
      (plus.*field)(i, j) += h;
      (minus.*field)(i, j) -= h;
      fd(i, j) = (ep(in, plus) - ep(in, minus)) / (2 * h);
    }
  return frobenius(fd - analytic) / std::max(frobenius(fd), 1e-8);
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const Instance in = random_instance(rng, t);
    const auto pooled = PooledStateMagnitude::from_states(in.states, in.hp.gamma);
    const ModelGrads g = grad_model(in.batch, in.states, in.prev, in.cause, pooled, in.model, in.hp);
    CHECK(fd_error(in, &LayerModel::a, g.da) <= 1e-4);
    CHECK(fd_error(in, &LayerModel::b, g.db) <= 1e-4);
    CHECK(fd_error(in, &LayerModel::c, g.dc) <= 1e-4);
  }
}

TEST_CASE("zero residual and zero pooling give zero gradients") {
  std::mt19937_64 rng(3);
  const LayerModel m = LayerModel::random({4, 6, 2, 2}, 1);
  HyperParams hp;
  hp.lambda = 0.0;
  std::vector<StateVector> states{StateVector(gaussian(6, rng)), StateVector(gaussian(6, rng))};
  const PatchBatch batch{0, {matvec(m.c, states[0].values), matvec(m.c, states[1].values)}};
  const auto pooled = PooledStateMagnitude::from_states(states, hp.gamma);
  const ModelGrads g = grad_model(batch, states, {}, CauseVector(Vector{0.3, -0.1}), pooled, m, hp);
  CHECK(frobenius(g.dc) <= 1e-12);
  CHECK(frobenius(g.da) == 0.0);

  const ModelGrads z = grad_model(batch, states, {}, CauseVector(Vector{0.3, -0.1}),
                                  PooledStateMagnitude{Vector(6)}, m, hp);
  CHECK(frobenius(z.db) == 0.0);
}

TEST_CASE("update keeps unit columns and is idempotent at zero gradient") {
  const LayerModel m = LayerModel::random({4, 6, 2, 1}, 2);
  LearnConfig cfg;
  cfg.theta_prox = 0.0;
  const ModelGrads zero{Matrix(6, 6), Matrix(6, 2), Matrix(4, 6)};
  const LayerModel same = update_model(m, zero, cfg, m);
  CHECK(frobenius(same.a - m.a) <= 1e-14);
  CHECK(frobenius(same.b - m.b) <= 1e-14);
  CHECK(frobenius(same.c - m.c) <= 1e-14);

  std::mt19937_64 rng(4);
  cfg.lr_a = cfg.lr_b = cfg.lr_c = 0.1;
  const LayerModel moved = update_model(m, {gaussian(6, 6, rng), gaussian(6, 2, rng), gaussian(4, 6, rng)}, cfg, m);
  for (double n : column_norms(moved.b)) CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
  for (double n : column_norms(moved.c)) CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a small dictionary step lowers the reconstruction error") {
  std::mt19937_64 rng(5);
  const LayerModel m = LayerModel::random({5, 8, 2, 3}, 3);
  HyperParams hp;
  hp.lambda = 0.0;
  PatchBatch batch;
  std::vector<StateVector> states;
  for (int n = 0; n < 3; ++n) {
    batch.patches.push_back(gaussian(5, rng));
    states.emplace_back(gaussian(8, rng, 0.3));
  }
  auto recon = [&](const LayerModel& model) {
    double s = 0;
    for (std::size_t n = 0; n < 3; ++n) {
      const Vector r = batch.patches[n] - matvec(model.c, states[n].values);
      s += 0.5 * dot(r, r);
    }
    return s;
  };
  const auto pooled = PooledStateMagnitude::from_states(states, hp.gamma);
  const ModelGrads g = grad_model(batch, states, {}, CauseVector::zeros(2), pooled, m, hp);
  // Raw gradient step on C alone; the column rescale is a separate projection.
  LayerModel step = m;
  step.c = m.c - 1e-3 * g.dc;
  CHECK(recon(step) < recon(m));
}

TEST_CASE("proximal weight pulls the update toward the previous model") {
  std::mt19937_64 rng(6);
  const LayerModel prev = LayerModel::random({4, 6, 2, 1}, 7);
  const LayerModel cur = LayerModel::random({4, 6, 2, 1}, 8);
  const ModelGrads g{gaussian(6, 6, rng), gaussian(6, 2, rng), gaussian(4, 6, rng)};
  LearnConfig loose;
  loose.lr_a = loose.lr_b = loose.lr_c = 0.05;
  loose.theta_prox = 0.0;
  LearnConfig tight = loose;
  tight.theta_prox = 10.0;
  const LayerModel a = update_model(cur, g, loose, prev);
  const LayerModel b = update_model(cur, g, tight, prev);
  CHECK(frobenius(b.a - prev.a) < frobenius(a.a - prev.a));
}

TEST_CASE("single zero frame leaves everything at zero") {
  const LayerDims dims{4, 6, 2, 2};
  HyperParams hp;
  LearnConfig cfg;
  cfg.max_outer_iter = 3;
  const std::vector<PatchBatch> frames{PatchBatch{0, {Vector(4), Vector(4)}}};
  const FitResult r = fit_layer(frames, dims, hp, cfg);
  const LayerModel init = LayerModel::random(dims, cfg.seed);
  CHECK(frobenius(r.model.c - init.c) <= 1e-12);
  CHECK(frobenius(r.model.b - init.b) <= 1e-12);
  for (const auto& s : r.variables[0].states) CHECK(norm_inf(s.values) == 0.0);
  CHECK(norm_inf(r.variables[0].cause.values) == 0.0);
}

TEST_CASE("fit recovers a sparse generative model") {
  std::mt19937_64 rng(9);
  const double noise = 0.05;
  const LayerModel truth = LayerModel::random({16, 24, 4, 4}, 99);
  std::normal_distribution<double> g(0.0, noise);
  std::uniform_int_distribution<std::size_t> pick(0, 23);
  std::vector<PatchBatch> frames;
  for (std::size_t t = 0; t < 12; ++t) {
    PatchBatch b{t, {}};
    for (int n = 0; n < 4; ++n) {
      Vector x(24);
      for (int a = 0; a < 3; ++a) x[pick(rng)] = 1.0 + 0.5 * g(rng) / noise;
      Vector y = matvec(truth.c, x);
      for (auto& v : y) v += g(rng);
      b.patches.push_back(y);
    }
    frames.push_back(std::move(b));
  }
  HyperParams hp;
  hp.mu = 0.05;
  hp.lambda = 0.0;
  hp.gamma = 0.01;
  hp.beta = 0.01;
  LearnConfig cfg;
  cfg.lr_a = cfg.lr_b = cfg.lr_c = 0.05;
  cfg.max_outer_iter = 40;
  cfg.seed = 1;
  const FitResult r = fit_layer(frames, {16, 24, 4, 4}, hp, cfg);

  const auto& trace = r.report.ep_trace;
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);

  double se = 0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < frames.size(); ++t)
    for (std::size_t n = 0; n < 4; ++n) {
      const Vector res = frames[t].patches[n] - matvec(r.model.c, r.variables[t].states[n].values);
      se += dot(res, res);
      count += res.size();
    }
  CHECK(se / count <= 2 * noise * noise);
}

TEST_CASE("learn config validation") {
  LearnConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr_b = 0;
  CHECK_THROWS(cfg.validate());
}
