#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mmdpcn/errors.hpp"
#include "mmdpcn/model.hpp"

using namespace mmdpcn;

namespace {

LayerModel scalar_model() { return {Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{1.0}}}; }

HyperParams no_temporal() {
  HyperParams hp;
  hp.lambda = 0.0;
  return hp;
}

}  // namespace

TEST_CASE("E_x of zero data and zero states") {
  const LayerModel m = LayerModel::random({4, 6, 2, 3}, 1);
  PatchBatch batch{0, {Vector(4), Vector(4), Vector(4)}};
  std::vector<StateVector> states(3, StateVector::zeros(6));
  CHECK(eval_Ex(batch, states, {}, m, no_temporal()) == 0.0);
}

TEST_CASE("E_x scalar hand value") {
  PatchBatch batch{0, {Vector{1.0}}};
  std::vector<StateVector> states{StateVector(Vector{0.7})};
  CHECK(eval_Ex(batch, states, {}, scalar_model(), no_temporal()) == doctest::Approx(0.255));
}

TEST_CASE("zero innovation adds nothing") {
  const LayerModel m = LayerModel::random({3, 4, 2, 1}, 5);
  HyperParams hp;
  hp.lambda = 2.0;
  const Vector prev{0.5, -0.2, 0.0, 1.0};
  const Vector x = matvec(m.a, prev);
  const Vector y{0.1, 0.2, 0.3};
  CHECK(eval_Ex_patch(y, x, &prev, m, hp) == doctest::Approx(eval_Ex_patch(y, x, nullptr, m, hp)));
}

TEST_CASE("E_u hand values") {
  const LayerModel m = scalar_model();
  HyperParams hp;
  hp.beta = 0.3;
  CHECK(eval_Eu(CauseVector::zeros(1), PooledStateMagnitude{Vector{0.0}}, m, hp) == 0.0);
  CHECK(eval_Eu(CauseVector::zeros(1), PooledStateMagnitude{Vector{1.0}}, m, hp) == doctest::Approx(2.0));
  const double u = std::log(1.0 / 0.3);
  CHECK(eval_Eu(CauseVector(Vector{u}), PooledStateMagnitude{Vector{1.0}}, m, hp) ==
        doctest::Approx(1.0 + 0.3 + 0.3 * u));
  CHECK(eval_Eu(CauseVector(Vector{u}), PooledStateMagnitude{Vector{1.0}}, m, hp) ==
        doctest::Approx(1.6612).epsilon(1e-4));
}

TEST_CASE("E_p is additive") {
  HyperParams hp = no_temporal();
  hp.gamma = 1.0 / 0.7;  // pooled |X| = 1 for x = 0.7
  hp.beta = 0.3;
  PatchBatch batch{0, {Vector{1.0}}};
  std::vector<StateVector> states{StateVector(Vector{0.7})};
  CHECK(eval_Ep(batch, states, {}, CauseVector::zeros(1), scalar_model(), hp) == doctest::Approx(2.255));
  PatchBatch zero{0, {Vector{0.0}}};
  std::vector<StateVector> zs{StateVector::zeros(1)};
  CHECK(eval_Ep(zero, zs, {}, CauseVector::zeros(1), scalar_model(), hp) == 0.0);
}

TEST_CASE("E_x is convex along random segments") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  HyperParams hp;
  hp.lambda = 0.4;
  for (int trial = 0; trial < 200; ++trial) {
    const LayerModel m = LayerModel::random({5, 8, 3, 1}, trial);
    Vector y(5), x1(8), x2(8), prev(8);
    for (auto* v : {&y, &x1, &x2, &prev})
      for (auto& e : *v) e = g(rng);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    const Vector mid = t * x1 + (1 - t) * x2;
    const double lhs = eval_Ex_patch(y, mid, &prev, m, hp);
    const double rhs = t * eval_Ex_patch(y, x1, &prev, m, hp) + (1 - t) * eval_Ex_patch(y, x2, &prev, m, hp);
    CHECK(lhs <= rhs + 1e-9);
  }
}

TEST_CASE("random model shapes and normalization") {
  const LayerModel m = LayerModel::random({6, 10, 4, 2}, 9);
  CHECK(m.dims(2) == LayerDims{6, 10, 4, 2});
  for (double n : column_norms(m.b)) CHECK(n == doctest::Approx(1.0));
  for (double n : column_norms(m.c)) CHECK(n == doctest::Approx(1.0));
  CHECK(LayerModel::random({6, 10, 4, 2}, 9) == m);
  CHECK_FALSE(LayerModel::random({6, 10, 4, 2}, 10) == m);
  CHECK_THROWS_AS(m.check({6, 11, 4, 2}), Error);
}

TEST_CASE("clamping pins components") {
  StateVector s(Vector{0.5, 1e-6, -2e-5, 0.0});
  CHECK(s.clamped_mask == std::vector<bool>{false, false, false, true});
  s.clamp(1e-4);
  CHECK(s.values == Vector{0.5, 0.0, 0.0, 0.0});
  CHECK(s.clamped_mask == std::vector<bool>{false, true, true, true});
}

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  CHECK_NOTHROW(hp.validate());
  hp.mu = -1;
  CHECK_THROWS_AS(hp.validate(), Error);
  hp = HyperParams{};
  hp.m_smooth = 0;
  CHECK_THROWS_AS(hp.validate(), Error);
  CHECK_THROWS_AS((LayerDims{0, 3, 1, 1}.validate()), Error);
}

TEST_CASE("guarded exponent never overflows") {
  CHECK(std::isfinite(guarded_exp_neg(-1e6)));
  CHECK(guarded_exp_neg(1e6) >= 0.0);
  CHECK(guarded_exp_neg(0.0) == 1.0);
}
