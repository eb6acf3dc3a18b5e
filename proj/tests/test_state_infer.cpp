#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mmdpcn/state_infer.hpp"

using namespace mmdpcn;

namespace {

LayerModel scalar_model() { return {Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{1.0}}}; }

HyperParams plain(double mu = 0.3) {
  HyperParams hp;
  hp.mu = mu;
  hp.lambda = 0.0;
  return hp;
}

// Cyclic coordinate descent on 0.5||y - Cx||^2 + mu||x||_1.
Vector lasso_cd(const Matrix& c, const Vector& y, double mu) {
  const std::size_t k = c.cols();
  Vector x(k);
  Vector r = y;
  const Vector sq = [&] {
    Vector s(k);
    for (std::size_t j = 0; j < k; ++j) s[j] = dot(c.column(j), c.column(j));
    return s;
  }();
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double moved = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double rho = x[j] * sq[j];
      for (std::size_t i = 0; i < c.rows(); ++i) rho += c(i, j) * r[i];
      const double nx = std::copysign(std::max(std::abs(rho) - mu, 0.0), rho) / sq[j];
      const double dx = nx - x[j];
      if (dx != 0.0)
        for (std::size_t i = 0; i < c.rows(); ++i) r[i] -= c(i, j) * dx;
      x[j] = nx;
      moved = std::max(moved, std::abs(dx));
    }
    if (moved < 1e-15) break;
  }
  return x;
}

Vector gaussian(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (auto& e : v) e = g(rng);
  return v;
}

}  // namespace

TEST_CASE("zero measurement gives zero state after one iteration") {
  const LayerModel m = LayerModel::random({6, 9, 2, 1}, 3);
  const StateResult r = infer_state(Vector(6), nullptr, m, plain(), StateVector::filled(9, 0.5));
  CHECK(r.trace.iterations == 1);
  CHECK(norm_inf(r.state.values) == 0.0);
}

TEST_CASE("scalar iterates follow the reweighted update") {
  const LayerModel m = scalar_model();
  const WoodburySolver solver(m.c);
  const StateVector start(Vector{1.0});
  const StateResult one = infer_state(Vector{1.0}, nullptr, m, plain(), solver, start, 1);
  const StateResult two = infer_state(Vector{1.0}, nullptr, m, plain(), solver, start, 2);
  CHECK(one.state.values[0] == doctest::Approx(1.0 / 1.3).epsilon(1e-12));
  CHECK(one.state.values[0] == doctest::Approx(0.7692).epsilon(1e-4));
  CHECK(two.state.values[0] == doctest::Approx(0.7194).epsilon(1e-4));
}

TEST_CASE("scalar state converges to the soft threshold") {
  HyperParams hp = plain();
  hp.inner_tol = 1e-13;
  hp.max_inner_iter = 1000;
  const StateResult r = infer_state(Vector{1.0}, nullptr, scalar_model(), hp, StateVector(Vector{1.0}));
  CHECK(r.trace.converged);
  CHECK(std::abs(r.state.values[0] - 0.7) <= 1e-6);
  const StateResult neg = infer_state(Vector{-2.0}, nullptr, scalar_model(), hp, StateVector(Vector{1.0}));
  CHECK(std::abs(neg.state.values[0] + 1.7) <= 1e-6);
  const StateResult dead = infer_state(Vector{0.2}, nullptr, scalar_model(), hp, StateVector(Vector{1.0}));
  CHECK(dead.state.values[0] == 0.0);
}

TEST_CASE("MM matches a coordinate-descent lasso oracle") {
  std::mt19937_64 rng(21);
  HyperParams hp = plain(0.2);
  hp.inner_tol = 1e-14;
  hp.max_inner_iter = 20000;
  hp.clamp_state = 1e-7;
  for (int t = 0; t < 30; ++t) {
    const LayerModel m = LayerModel::random({8, 12, 1, 1}, 100 + t);
    const Vector y = gaussian(8, rng);
    const Vector ref = lasso_cd(m.c, y, hp.mu);
    const StateResult r = infer_state(y, nullptr, m, hp);
    const double f_ref = state_objective(y, ref, nullptr, m, hp);
    CHECK(state_objective(y, r.state.values, nullptr, m, hp) - f_ref <= 1e-10 * std::max(1.0, f_ref));
    // Flat directions leave the iterate slower to settle than the objective.
    CHECK(norm_inf(r.state.values - ref) <= 1e-4);
  }
}

TEST_CASE("smoothed objective never increases") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    const std::size_t p = 3 + t % 6, k = p + 1 + t % 9;
    const LayerModel m = LayerModel::random({p, k, 2, 1}, t);
    HyperParams hp;
    hp.mu = 0.05 + 0.1 * (t % 5);
    hp.lambda = t % 3 == 0 ? 0.0 : 0.2 * (t % 4);
    const Vector y = gaussian(p, rng);
    const StateVector prev(gaussian(k, rng, 0.5));
    const StateResult r = infer_state(y, &prev, m, hp);
    const auto& obj = r.trace.objective_per_iter;
    REQUIRE(obj.size() == r.trace.iterations + 1);
    for (std::size_t i = 1; i < obj.size(); ++i) CHECK(obj[i] <= obj[i - 1] + 1e-9);
  }
}

TEST_CASE("trace bookkeeping") {
  std::mt19937_64 rng(6);
  const LayerModel m = LayerModel::random({6, 10, 2, 1}, 1);
  const Vector y = gaussian(6, rng);
  HyperParams hp = plain();
  const StateResult r = infer_state(y, nullptr, m, hp);
  CHECK(r.trace.objective_per_iter.front() ==
        doctest::Approx(state_objective(y, StateVector::filled(10, kDefaultStateInit).values, nullptr, m, hp)));
  CHECK(r.trace.final_objective() == doctest::Approx(state_objective(y, r.state.values, nullptr, m, hp)));
  CHECK(r.trace.sparsity_per_iter.size() == r.trace.objective_per_iter.size());
  CHECK(r.trace.sparsity_per_iter.back() == doctest::Approx(zero_percent(r.state.values.span())));
  CHECK(r.trace.wall_time >= 0.0);
  for (std::size_t k = 0; k < 10; ++k)
    if (r.state.clamped_mask[k]) CHECK(r.state.values[k] == 0.0);
}

TEST_CASE("batch of one equals the single call") {
  std::mt19937_64 rng(7);
  const LayerModel m = LayerModel::random({5, 7, 2, 1}, 2);
  HyperParams hp;
  const PatchBatch batch{0, {gaussian(5, rng)}};
  const StateVector prev(gaussian(7, rng));
  const std::vector<StateVector> prevs{prev};
  const BatchStateResult b = infer_states_batch(batch, prevs, m, hp);
  const StateResult s = infer_state(batch.patches[0], &prev, m, hp);
  CHECK(b.states[0] == s.state);
}

TEST_CASE("identical patches give identical states") {
  std::mt19937_64 rng(8);
  const LayerModel m = LayerModel::random({5, 7, 2, 4}, 2);
  const Vector y = gaussian(5, rng);
  const BatchStateResult b = infer_states_batch(PatchBatch{0, {y, y, y, y}}, {}, m, plain());
  for (std::size_t n = 1; n < 4; ++n) CHECK(b.states[n] == b.states[0]);
}

TEST_CASE("parallel batch matches the sequential order") {
  std::mt19937_64 rng(9);
  const LayerModel m = LayerModel::random({16, 24, 3, 4}, 4);
  HyperParams hp;
  PatchBatch batch;
  std::vector<StateVector> prev;
  for (int n = 0; n < 4; ++n) {
    batch.patches.push_back(gaussian(16, rng));
    prev.emplace_back(gaussian(24, rng, 0.3));
  }
  const BatchStateResult seq = infer_states_batch(batch, prev, m, hp, false);
  const BatchStateResult par = infer_states_batch(batch, prev, m, hp, true);
  for (std::size_t n = 0; n < 4; ++n) {
    CHECK(seq.states[n] == par.states[n]);
    CHECK(std::abs(seq.traces[n].final_objective() - par.traces[n].final_objective()) <= 1e-12);
  }
}

TEST_CASE("KKT residual is small at convergence") {
  std::mt19937_64 rng(10);
  HyperParams hp;
  hp.lambda = 0.3;
  hp.inner_tol = 1e-12;
  hp.max_inner_iter = 5000;
  const LayerModel m = LayerModel::random({8, 12, 2, 1}, 12);
  const Vector y = gaussian(8, rng);
  const StateVector prev(gaussian(12, rng, 0.5));
  const StateResult r = infer_state(y, &prev, m, hp);
  CHECK(r.trace.kkt_residual <= 1e-3);
  CHECK(state_kkt_residual(y, r.state.values, &prev.values, m, hp) == doctest::Approx(r.trace.kkt_residual));
}
