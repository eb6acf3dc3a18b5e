#pragma once

// Majorization machinery shared by the state and cause solvers: the smoothed
// l1 approximator, the quadratic majorizer of a weighted l1 penalty, the
// reweighting diagonal R = W^{-1} and the matrix-inverse-lemma operator
//   T(C, R) = R - R C^T (I + C R C^T)^{-1} C R  =  (C^T C + R^{-1})^{-1}.

#include <cstddef>

#include "mmdpcn/tensor.hpp"

namespace mmdpcn {

// Componentwise clip(e / m, -1, 1): the maximizer alpha* of the smoothed l1.
Vector soft_clip(const Vector& e, double m);

// alpha*^T e - (m/2)||alpha*||^2. Never exceeds ||e||_1 and trails it by at
// most m/2 per component.
double smooth_l1(const Vector& e, double m);

struct SmoothApprox {
  Vector alpha_star;
  double m_smooth = 0.0;
  Vector innovation;

  static SmoothApprox at(Vector innovation, double m);
};

// 0.5 x^T W x + c with W = diag(weight / |v|) and c = sum_k weight |v_k| / 2.
// Components with v_k = 0 contribute +inf unless x_k = 0.
double majorizer_value(const Vector& x, const Vector& v, double weight);

// R = diag(|v| / (weight + curvature |v|)), i.e. (W + curvature I)^{-1}. Zero
// components of v stay zero. curvature = 0 is the plain reweighting.
struct ReweightDiagonal {
  Vector r;
  double weight = 0.0;

  std::size_t support_size() const;
};

ReweightDiagonal reweight(const Vector& v, double weight, double curvature = 0.0);

// Applies T(C, R) to rhs. Uses the P x P form (I + C R C^T) or the equivalent
// support-restricted form (I + R_S^{1/2} C_S^T C_S R_S^{1/2}), whichever is
// cheaper to build and factorize; inner systems up to `dense_limit` are factorized, larger ones go
// through CG with a dense fallback.
class WoodburySolver {
 public:
  static constexpr std::size_t kDenseLimit = 256;

  explicit WoodburySolver(const Matrix& c);

  Vector apply(const ReweightDiagonal& r, const Vector& rhs) const;

  const Matrix& dictionary() const noexcept { return c_; }
  const Matrix& gram() const noexcept { return gram_; }

 private:
  Vector apply_support(const ReweightDiagonal& r, const Vector& rhs) const;
  Vector apply_measurement(const ReweightDiagonal& r, const Vector& rhs) const;

  Matrix c_;
  Matrix gram_;  // C^T C
};

Vector woodbury_apply(const Matrix& c, const ReweightDiagonal& r, const Vector& rhs);

// Solves an SPD system, through CG above `dense_limit` (falling back to a
// dense factorization on NonConvergence) and by Cholesky otherwise.
Vector solve_spd(const Matrix& m, const Vector& b, std::size_t dense_limit = WoodburySolver::kDenseLimit);

}  // namespace mmdpcn
