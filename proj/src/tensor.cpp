#include "mmdpcn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "mmdpcn/errors.hpp"

namespace mmdpcn {

namespace {

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) fail(ErrorKind::DimensionMismatch, std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  check_same(data_.size(), rows * cols, "Matrix data length");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    check_same(r.size(), cols_, "Matrix row length");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Vector operator+(const Vector& a, const Vector& b) {
  Vector out = a;
  out += b;
  return out;
}

Vector operator-(const Vector& a, const Vector& b) {
  Vector out = a;
  out -= b;
  return out;
}

Vector operator*(double s, const Vector& v) {
  Vector out = v;
  for (double& x : out) x *= s;
  return out;
}

Vector& operator+=(Vector& a, const Vector& b) {
  check_same(a.size(), b.size(), "vector add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Vector& operator-=(Vector& a, const Vector& b) {
  check_same(a.size(), b.size(), "vector subtract");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

double dot(const Vector& a, const Vector& b) {
  check_same(a.size(), b.size(), "dot");
  return dot_n(a.data(), b.data(), a.size());
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

double norm1(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double norm_inf(const Vector& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  check_same(a.rows(), b.rows(), "matrix add rows");
  check_same(a.cols(), b.cols(), "matrix add cols");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  check_same(a.rows(), b.rows(), "matrix subtract rows");
  check_same(a.cols(), b.cols(), "matrix subtract cols");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Matrix operator*(double s, const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) out.data()[i] *= s;
  return out;
}

double frobenius(const Matrix& m) {
  double s = 0.0;
  for (double x : m.values()) s += x * x;
  return std::sqrt(s);
}

Vector matvec(const Matrix& m, const Vector& v) {
  check_same(m.cols(), v.size(), "matvec");
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    out[r] = dot_n(row.data(), v.data(), m.cols());
  }
  return out;
}

Vector matvec_t(const Matrix& m, const Vector& v) {
  check_same(m.rows(), v.size(), "matvec_t");
  Vector out(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * vr;
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_same(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  return out;
}

Matrix gram(const Matrix& m) {
  Matrix out(m.cols(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double ri = row[i];
      if (ri == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = i; j < m.cols(); ++j) orow[j] += ri * row[j];
    }
  }
  for (std::size_t i = 0; i < m.cols(); ++i)
    for (std::size_t j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out;
}

Matrix outer(const Vector& a, const Vector& b) {
  Matrix out(a.size(), b.size());
  add_outer(out, 1.0, a, b);
  return out;
}

void add_outer(Matrix& m, double s, const Vector& a, const Vector& b) {
  check_same(m.rows(), a.size(), "outer rows");
  check_same(m.cols(), b.size(), "outer cols");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = s * a[i];
    if (ai == 0.0) continue;
    auto row = m.row(i);
    for (std::size_t j = 0; j < b.size(); ++j) row[j] += ai * b[j];
  }
}

Vector cg_solve(const LinearOperator& apply, const Vector& b, double tol, std::size_t max_iter) {
  require(tol > 0.0, ErrorKind::InvalidArgument, "cg_solve tolerance must be positive");
  const std::size_t n = b.size();
  if (max_iter == 0) max_iter = std::max<std::size_t>(n, 1);
  const double target = tol * std::max(1.0, norm2(b));

  Vector x(n);
  Vector r = b;
  double rr = dot(r, r);
  if (std::sqrt(rr) <= target) return x;
  Vector p = r;

  for (std::size_t it = 0; it < max_iter; ++it) {
    const Vector ap = apply(p);
    require(ap.size() == n, ErrorKind::DimensionMismatch, "cg_solve operator output size");
    const double pap = dot(p, ap);
    require(std::isfinite(pap) && pap > 0.0, ErrorKind::NonFinite,
            "cg_solve: operator is not positive definite along the search direction");
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_next = dot(r, r);
    require(std::isfinite(rr_next) && all_finite(x.span()), ErrorKind::NonFinite,
            "cg_solve iterate is not finite");
    if (std::sqrt(rr_next) <= target) {
      // The recursive residual drifts; confirm against the true one.
      const Vector true_r = b - apply(x);
      if (norm2(true_r) <= target) return x;
      r = true_r;
      rr = dot(r, r);
      p = r;
      continue;
    }
    const double beta = rr_next / rr;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_next;
  }
  fail(ErrorKind::NonConvergence, "cg_solve: residual tolerance not met after " +
                                      std::to_string(max_iter) + " iterations");
}

Vector cg_solve(const LinearOperator& apply, const Vector& b, CgOptions opts) {
  return cg_solve(apply, b, opts.tol, opts.max_iter);
}

Vector cholesky_solve(Matrix a, const Vector& b) {
  const std::size_t n = a.rows();
  check_same(a.cols(), n, "cholesky_solve square");
  check_same(b.size(), n, "cholesky_solve rhs");
  // In-place lower factor.
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    const auto rj = a.row(j);
    d -= dot_n(rj.data(), rj.data(), j);
    require(d > 0.0 && std::isfinite(d), ErrorKind::NonFinite,
            "cholesky_solve: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      const auto ri = a.row(i);
      ri[j] = (ri[j] - dot_n(ri.data(), rj.data(), j)) / ljj;
    }
  }
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (b[i] - dot_n(a.row(i).data(), y.data(), i)) / a(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a(k, ii) * x[k];
    x[ii] = s / a(ii, ii);
  }
  return x;
}

Vector lu_solve(Matrix a, const Vector& b) {
  const std::size_t n = a.rows();
  check_same(a.cols(), n, "lu_solve square");
  check_same(b.size(), n, "lu_solve rhs");
  Vector x = b;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
    require(std::abs(a(pivot, k)) > 1e-300, ErrorKind::NonFinite, "lu_solve: singular matrix");
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
      std::swap(x[k], x[pivot]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      x[i] -= f * x[k];
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x[j];
    x[ii] = s / a(ii, ii);
  }
  return x;
}

Vector column_norms(const Matrix& m) {
  Vector norms(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) norms[c] += row[c] * row[c];
  }
  for (double& n : norms) n = std::sqrt(n);
  return norms;
}

Matrix column_normalize(const Matrix& m) {
  const Vector norms = column_norms(m);
  for (std::size_t c = 0; c < m.cols(); ++c)
    require(norms[c] >= 1e-12, ErrorKind::ZeroColumn, "column " + std::to_string(c) + " has zero norm");
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] /= norms[c];
  }
  return out;
}

}  // namespace mmdpcn
