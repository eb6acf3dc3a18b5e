#include "mmdpcn/majorizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mmdpcn/errors.hpp"

namespace mmdpcn {

Vector soft_clip(const Vector& e, double m) {
  require(m > 0.0, ErrorKind::InvalidArgument, "soft_clip: m must be positive");
  Vector out(e.size());
  for (std::size_t k = 0; k < e.size(); ++k) out[k] = std::clamp(e[k] / m, -1.0, 1.0);
  return out;
}

double smooth_l1(const Vector& e, double m) {
  const Vector alpha = soft_clip(e, m);
  return dot(alpha, e) - 0.5 * m * dot(alpha, alpha);
}

SmoothApprox SmoothApprox::at(Vector innovation, double m) {
  SmoothApprox s;
  s.alpha_star = soft_clip(innovation, m);
  s.m_smooth = m;
  s.innovation = std::move(innovation);
  return s;
}

double majorizer_value(const Vector& x, const Vector& v, double weight) {
  require(x.size() == v.size(), ErrorKind::DimensionMismatch, "majorizer_value lengths");
  require(weight > 0.0, ErrorKind::InvalidArgument, "majorizer_value: weight must be positive");
  double h = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double av = std::abs(v[k]);
    if (av == 0.0) {
      if (x[k] != 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    h += 0.5 * weight / av * x[k] * x[k] + 0.5 * weight * av;
  }
  return h;
}

std::size_t ReweightDiagonal::support_size() const {
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](double x) { return x != 0.0; }));
}

ReweightDiagonal reweight(const Vector& v, double weight, double curvature) {
  require(weight > 0.0, ErrorKind::InvalidArgument, "reweight: weight must be positive");
  require(curvature >= 0.0, ErrorKind::InvalidArgument, "reweight: curvature must be nonnegative");
  ReweightDiagonal out{Vector(v.size()), weight};
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double av = std::abs(v[k]);
    out.r[k] = av == 0.0 ? 0.0 : av / (weight + curvature * av);
  }
  return out;
}

Vector solve_spd(const Matrix& m, const Vector& b, std::size_t dense_limit) {
  if (m.rows() <= dense_limit) return cholesky_solve(m, b);
  try {
    return cg_solve([&m](const Vector& p) { return matvec(m, p); }, b, 1e-12, m.rows());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NonConvergence) throw;
    return cholesky_solve(m, b);
  }
}

WoodburySolver::WoodburySolver(const Matrix& c) : c_(c), gram_(mmdpcn::gram(c)) {}

Vector WoodburySolver::apply(const ReweightDiagonal& r, const Vector& rhs) const {
  require(r.r.size() == c_.cols() && rhs.size() == c_.cols(), ErrorKind::DimensionMismatch,
          "woodbury_apply: reweighting and rhs must have length K");
  for (double x : r.r) require(x >= 0.0, ErrorKind::InvalidArgument, "woodbury_apply: negative reweighting entry");
  const std::size_t support = r.support_size();
  if (support == 0) return Vector(c_.cols());
  // Rough flop counts of building and factorizing each inner system.
  const double s = static_cast<double>(support);
  const double p = static_cast<double>(c_.rows());
  const double k = static_cast<double>(c_.cols());
  if (support <= c_.rows() || s * s * (s / 3.0 + 2.0) <= p * p * (s / 2.0 + p / 3.0) + 2.0 * p * k)
    return apply_support(r, rhs);
  return apply_measurement(r, rhs);
}

Vector WoodburySolver::apply_support(const ReweightDiagonal& r, const Vector& rhs) const {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < r.r.size(); ++k)
    if (r.r[k] != 0.0) idx.push_back(k);
  const std::size_t s = idx.size();
  std::vector<double> root(s);
  for (std::size_t i = 0; i < s; ++i) root[i] = std::sqrt(r.r[idx[i]]);

  Matrix m(s, s);
  Vector b(s);
  for (std::size_t i = 0; i < s; ++i) {
    const auto grow = gram_.row(idx[i]);
    for (std::size_t j = 0; j < s; ++j) m(i, j) = root[i] * grow[idx[j]] * root[j];
    m(i, i) += 1.0;
    b[i] = root[i] * rhs[idx[i]];
  }
  const Vector z = solve_spd(m, b);
  Vector out(c_.cols());
  for (std::size_t i = 0; i < s; ++i) out[idx[i]] = root[i] * z[i];
  return out;
}

Vector WoodburySolver::apply_measurement(const ReweightDiagonal& r, const Vector& rhs) const {
  const std::size_t p = c_.rows();
  const std::size_t k = c_.cols();
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < k; ++j)
    if (r.r[j] != 0.0) idx.push_back(j);
  const std::size_t s = idx.size();
  Vector rr(k);
  for (std::size_t j : idx) rr[j] = r.r[j] * rhs[j];

  // I + (C_S R_S^{1/2})(C_S R_S^{1/2})^T; zero columns of R drop out.
  std::vector<double> root(s);
  for (std::size_t i = 0; i < s; ++i) root[i] = std::sqrt(r.r[idx[i]]);
  Matrix scaled(p, s);
  for (std::size_t a = 0; a < p; ++a) {
    const auto ca = c_.row(a);
    auto sa = scaled.row(a);
    for (std::size_t i = 0; i < s; ++i) sa[i] = ca[idx[i]] * root[i];
  }
  Matrix m = Matrix::identity(p);
  for (std::size_t a = 0; a < p; ++a) {
    const double* sa = scaled.row(a).data();
    for (std::size_t b = a; b < p; ++b) {
      const double* sb = scaled.row(b).data();
      m(a, b) += dot_n(sa, sb, s);
      if (b != a) m(b, a) = m(a, b);
    }
  }

  const Vector w = solve_spd(m, matvec(c_, rr));
  const Vector ctw = matvec_t(c_, w);
  Vector out(k);
  for (std::size_t j : idx) out[j] = rr[j] - r.r[j] * ctw[j];
  return out;
}

Vector woodbury_apply(const Matrix& c, const ReweightDiagonal& r, const Vector& rhs) {
  return WoodburySolver(c).apply(r, rhs);
}

}  // namespace mmdpcn
