#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mmdpcn/majorizer.hpp"

using namespace mmdpcn;

namespace {

Vector dense_oracle(const Matrix& c, const Vector& r, const Vector& rhs) {
  Matrix m = gram(c);
  for (std::size_t k = 0; k < r.size(); ++k) m(k, k) += 1.0 / r[k];
  return lu_solve(m, rhs);
}

}  // namespace

TEST_CASE("soft_clip") {
  CHECK(soft_clip(Vector{0.0}, 0.1) == Vector{0.0});
  CHECK(soft_clip(Vector{0.5, -0.2}, 0.1) == Vector{1.0, -1.0});
  CHECK(soft_clip(Vector{0.05}, 0.1)[0] == doctest::Approx(0.5));
}

TEST_CASE("smooth_l1") {
  CHECK(smooth_l1(Vector{0.0}, 0.1) == 0.0);
  CHECK(smooth_l1(Vector{0.05}, 0.1) == doctest::Approx(0.0125));
  CHECK(smooth_l1(Vector{1.0}, 0.1) == doctest::Approx(0.95));
}

TEST_CASE("smooth_l1 sandwich") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int t = 0; t < 500; ++t) {
    Vector e(6);
    for (auto& v : e) v = g(rng) * 0.3;
    const double m = 0.01 + std::abs(g(rng)) * 0.2;
    const double s = smooth_l1(e, m);
    CHECK(s <= norm1(e) + 1e-12);
    CHECK(s >= norm1(e) - 6 * m / 2 - 1e-12);
  }
}

TEST_CASE("majorizer_value") {
  CHECK(majorizer_value(Vector{1.0}, Vector{1.0}, 0.3) == doctest::Approx(0.3));
  CHECK(majorizer_value(Vector{0.0}, Vector{1.0}, 0.3) == doctest::Approx(0.15));
  CHECK(majorizer_value(Vector{2.0}, Vector{1.0}, 0.3) == doctest::Approx(0.75));
  CHECK(std::isinf(majorizer_value(Vector{1.0}, Vector{0.0}, 0.3)));
  CHECK(majorizer_value(Vector{0.0}, Vector{0.0}, 0.3) == 0.0);
}

TEST_CASE("majorizer dominates and touches the weighted l1") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int t = 0; t < 500; ++t) {
    Vector x(5), v(5);
    for (auto& e : x) e = g(rng);
    for (auto& e : v) e = g(rng);
    const double w = 0.05 + std::abs(g(rng));
    CHECK(majorizer_value(x, v, w) >= w * norm1(x) - 1e-12);
    CHECK(majorizer_value(v, v, w) == doctest::Approx(w * norm1(v)));
  }
}

TEST_CASE("reweight") {
  CHECK(reweight(Vector{0.3}, 0.3).r[0] == doctest::Approx(1.0));
  const ReweightDiagonal z = reweight(Vector{0.0, 0.6}, 0.3);
  CHECK(z.r[0] == 0.0);
  CHECK(z.r[1] == doctest::Approx(2.0));
  CHECK(z.support_size() == 1);
  CHECK(reweight(Vector{1.0}, 0.5, 2.0).r[0] == doctest::Approx(1.0 / 2.5));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Vector v(10);
  for (auto& e : v) e = g(rng);
  const ReweightDiagonal r = reweight(v, 0.7);
  for (std::size_t k = 0; k < v.size(); ++k) CHECK(r.r[k] * (0.7 / std::abs(v[k])) == doctest::Approx(1.0));
}

TEST_CASE("woodbury scalar and zero cases") {
  for (double rho : {0.1, 1.0, 7.5}) {
    const Vector z = woodbury_apply(Matrix{{1.0}}, ReweightDiagonal{Vector{rho}, 1.0}, Vector{1.0});
    CHECK(z[0] == doctest::Approx(rho / (1 + rho)));
    CHECK(z[0] == doctest::Approx(1.0 / (1.0 + 1.0 / rho)));
  }
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Matrix c(4, 9);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 9; ++j) c(i, j) = g(rng);
  const Vector out = woodbury_apply(c, ReweightDiagonal{Vector(9), 1.0}, Vector(9, 1.0));
  CHECK(norm_inf(out) == 0.0);
}

TEST_CASE("woodbury matches a dense solve") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> pos(0.01, 3.0);
  for (const auto [p, k] : {std::pair<std::size_t, std::size_t>{4, 9}, {9, 4}, {16, 32}, {7, 7}}) {
    for (int t = 0; t < 25; ++t) {
      Matrix c(p, k);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < k; ++j) c(i, j) = g(rng);
      Vector r(k), rhs(k);
      for (auto& e : r) e = pos(rng);
      for (auto& e : rhs) e = g(rng);
      const Vector ref = dense_oracle(c, r, rhs);
      const Vector z = WoodburySolver(c).apply(ReweightDiagonal{r, 1.0}, rhs);
      CHECK(norm2(z - ref) <= 1e-8 * norm2(ref));
    }
  }
}

TEST_CASE("woodbury restricted to a partial support") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  Matrix c(6, 10);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 10; ++j) c(i, j) = g(rng);
  Vector r(10), rhs(10);
  for (std::size_t k = 0; k < 10; ++k) {
    r[k] = k % 3 == 0 ? 0.0 : 0.5 + k * 0.1;
    rhs[k] = g(rng);
  }
  // Oracle on the support only; off-support entries must come back zero.
  const Vector z = WoodburySolver(c).apply(ReweightDiagonal{r, 1.0}, rhs);
  std::vector<std::size_t> s;
  for (std::size_t k = 0; k < 10; ++k)
    if (r[k] > 0) s.push_back(k);
  Matrix cs(6, s.size());
  Vector rs(s.size()), bs(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    for (std::size_t i = 0; i < 6; ++i) cs(i, j) = c(i, s[j]);
    rs[j] = r[s[j]];
    bs[j] = rhs[s[j]];
  }
  const Vector ref = dense_oracle(cs, rs, bs);
  for (std::size_t k = 0; k < 10; ++k)
    if (r[k] == 0) CHECK(z[k] == 0.0);
  for (std::size_t j = 0; j < s.size(); ++j) CHECK(z[s[j]] == doctest::Approx(ref[j]).epsilon(1e-9));
}

TEST_CASE("solve_spd above and below the dense limit") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (std::size_t n : {5ul, 40ul}) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = g(rng);
    const Matrix m = gram(a) + Matrix::identity(n);
    Vector b(n);
    for (auto& e : b) e = g(rng);
    const Vector ref = lu_solve(m, b);
    CHECK(norm2(solve_spd(m, b) - ref) <= 1e-8 * norm2(ref));
    CHECK(norm2(solve_spd(m, b, 4) - ref) <= 1e-7 * norm2(ref));
  }
}
