#pragma once

// Dense linear-algebra substrate: row-major matrices, vectors, a conjugate
// gradient solver and the two direct factorizations the solvers fall back on.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace mmdpcn {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  // `values` is row-major and must hold rows*cols entries.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  const std::vector<double>& values() const noexcept { return data_; }

  Vector column(std::size_t c) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Elementwise vector arithmetic.
Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Vector operator*(double s, const Vector& v);
Vector& operator+=(Vector& a, const Vector& b);
Vector& operator-=(Vector& a, const Vector& b);

double dot(const Vector& a, const Vector& b);
// Raw dot product over n contiguous entries; fixed summation order.
inline double dot_n(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}
double norm2(const Vector& v);
double norm1(const Vector& v);
double norm_inf(const Vector& v);
bool all_finite(std::span<const double> values);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);
double frobenius(const Matrix& m);

// m * v
Vector matvec(const Matrix& m, const Vector& v);
// m^T * v
Vector matvec_t(const Matrix& m, const Vector& v);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
// m^T m
Matrix gram(const Matrix& m);
// a b^T
Matrix outer(const Vector& a, const Vector& b);
// m += s * a b^T
void add_outer(Matrix& m, double s, const Vector& a, const Vector& b);

using LinearOperator = std::function<Vector(const Vector&)>;

struct CgOptions {
  double tol = 1e-8;
  // 0 means "dimension of the system".
  std::size_t max_iter = 0;
};

// Conjugate gradients for a symmetric positive-definite operator. Stops once
// ||apply(z) - b|| <= tol * max(1, ||b||). Throws NonConvergence when the
// iteration budget runs out and NonFinite when an iterate blows up.
Vector cg_solve(const LinearOperator& apply, const Vector& b, double tol, std::size_t max_iter);
Vector cg_solve(const LinearOperator& apply, const Vector& b, CgOptions opts = {});

// Cholesky solve of an SPD system. Throws NonFinite when the matrix is not
// numerically positive definite.
Vector cholesky_solve(Matrix a, const Vector& b);

// LU with partial pivoting; general square systems.
Vector lu_solve(Matrix a, const Vector& b);

// Column norms in one pass.
Vector column_norms(const Matrix& m);

// Scales every column to unit l2 norm. Throws ZeroColumn when a column norm
// falls below 1e-12.
Matrix column_normalize(const Matrix& m);

}  // namespace mmdpcn
