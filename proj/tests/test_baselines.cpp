#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mmdpcn/baselines.hpp"
#include "mmdpcn/errors.hpp"
#include "mmdpcn/state_infer.hpp"

using namespace mmdpcn;

namespace {

LayerModel scalar_model() { return {Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{1.0}}}; }

HyperParams plain() {
  HyperParams hp;
  hp.lambda = 0.0;
  return hp;
}

BaselineConfig with(BaselineMethod m, double step, double tol = 1e-12, std::size_t iters = 5000) {
  BaselineConfig cfg;
  cfg.method = m;
  cfg.step = step;
  cfg.tol = tol;
  cfg.max_iter = iters;
  return cfg;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_baseline_method("ista") == BaselineMethod::Ista);
  CHECK(parse_baseline_method("fista") == BaselineMethod::Fista);
  CHECK(parse_baseline_method("adam") == BaselineMethod::Adam);
  CHECK(to_string(BaselineMethod::Fista) == "fista");
  CHECK_THROWS_AS(parse_baseline_method("lbfgs"), Error);
  BaselineConfig bad;
  bad.step = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("ISTA and FISTA reach the scalar soft threshold") {
  for (auto m : {BaselineMethod::Ista, BaselineMethod::Fista}) {
    const BaselineResult r = baseline_solve(Vector{1.0}, nullptr, scalar_model(), plain(), with(m, 0.5));
    CHECK(r.state.values[0] == doctest::Approx(0.7).epsilon(1e-6));
    const BaselineResult z = baseline_solve(Vector{0.0}, nullptr, scalar_model(), plain(), with(m, 0.5));
    CHECK(z.state.values[0] == 0.0);
  }
}

TEST_CASE("FISTA needs fewer iterations than ISTA and lands on the same point") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::size_t fista_total = 0, ista_total = 0;
  for (int t = 0; t < 20; ++t) {
    const LayerModel m = LayerModel::random({10, 16, 2, 1}, t);
    Vector y(10);
    for (auto& e : y) e = g(rng);
    const double step = 1.0 / lipschitz_constant(m.c);
    ista_total += ista_solve(y, nullptr, m, plain(), with(BaselineMethod::Ista, step, 1e-10)).trace.iterations;
    fista_total += fista_solve(y, nullptr, m, plain(), with(BaselineMethod::Fista, step, 1e-10)).trace.iterations;
    const BaselineResult i = ista_solve(y, nullptr, m, plain(), with(BaselineMethod::Ista, step, 0.0, 50000));
    const BaselineResult f = fista_solve(y, nullptr, m, plain(), with(BaselineMethod::Fista, step, 0.0, 50000));
    CHECK(norm_inf(i.state.values - f.state.values) <= 1e-6);
  }
  CHECK(fista_total < ista_total);
}

TEST_CASE("Adam gets close to the scalar optimum") {
  BaselineConfig cfg = with(BaselineMethod::Adam, 1e-2, 0.0, 2000);
  const BaselineResult r = adam_solve(Vector{1.0}, nullptr, scalar_model(), plain(), cfg);
  CHECK(std::abs(r.trace.final_objective() - 0.255) <= 5e-3);
  const BaselineResult z = adam_solve(Vector{0.0}, nullptr, scalar_model(), plain(), cfg);
  CHECK(norm_inf(z.state.values) == 0.0);
}

TEST_CASE("lipschitz constant of a known spectrum") {
  const Matrix c{{2, 0, 0}, {0, 1, 0}};
  CHECK(lipschitz_constant(c) == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("baseline traces are consistent") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const LayerModel m = LayerModel::random({8, 12, 2, 1}, 4);
  Vector y(8);
  for (auto& e : y) e = g(rng);
  HyperParams hp;
  const StateVector prev(Vector(12, 0.1));
  for (auto method : {BaselineMethod::Ista, BaselineMethod::Fista, BaselineMethod::Adam}) {
    const BaselineResult r = baseline_solve(y, &prev, m, hp, with(method, 1e-2, 0.0, 50));
    CHECK(r.trace.iterations == 50);
    CHECK(r.trace.objective_per_iter.size() == 51);
    CHECK(r.trace.sparsity_per_iter.size() == 51);
    CHECK(r.trace.final_objective() == doctest::Approx(state_objective(y, r.state.values, &prev.values, m, hp)));
  }
}

TEST_CASE("ISTA objective never increases with a safe step") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    const LayerModel m = LayerModel::random({6, 9, 2, 1}, t);
    Vector y(6);
    for (auto& e : y) e = g(rng);
    const BaselineResult r =
        ista_solve(y, nullptr, m, plain(), with(BaselineMethod::Ista, 1.0 / lipschitz_constant(m.c), 0.0, 100));
    const auto& obj = r.trace.objective_per_iter;
    for (std::size_t i = 1; i < obj.size(); ++i) CHECK(obj[i] <= obj[i - 1] + 1e-12);
  }
}
