#pragma once

// Generative-model types for one layer and exact evaluators of the state,
// cause and overall objectives.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mmdpcn/tensor.hpp"

namespace mmdpcn {

struct HyperParams {
  double mu = 0.3;        // state sparsity weight
  double lambda = 0.1;    // temporal (innovation) weight
  double gamma = 0.1;     // state-pooling weight
  double beta = 0.3;      // cause sparsity weight
  double m_smooth = 0.1;  // smoothing width of the l1 approximator
  double clamp_state = 1e-4;
  double clamp_cause = 1e-4;
  std::size_t i_s = 5;  // state sub-iterations per interleave block
  std::size_t j_s = 5;  // cause sub-iterations per interleave block
  double inner_tol = 1e-6;
  std::size_t max_inner_iter = 200;

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

struct LayerDims {
  std::size_t p = 0;  // measurement (patch) length
  std::size_t k = 0;  // state length
  std::size_t d = 0;  // cause length
  std::size_t n = 1;  // patches per frame

  void validate() const;
  bool operator==(const LayerDims&) const = default;
};

// Dictionary triple for one layer: A (K x K) transition, B (K x D) state-cause
// coupling, C (P x K) observation dictionary.
struct LayerModel {
  Matrix a;
  Matrix b;
  Matrix c;

  LayerDims dims(std::size_t n = 1) const { return {c.rows(), c.cols(), b.cols(), n}; }
  // Throws DimensionMismatch when the three shapes disagree with `dims`.
  void check(const LayerDims& dims) const;

  // Standard-normal entries scaled by 1/sqrt(rows), then unit columns for B
  // and C. Deterministic for a given seed.
  static LayerModel random(const LayerDims& dims, std::uint64_t seed);

  bool operator==(const LayerModel&) const = default;
};

// A latent vector whose clamped components are pinned to exact zero.
template <class Tag>
struct ClampedVector {
  Vector values;
  std::vector<bool> clamped_mask;

  ClampedVector() = default;
  explicit ClampedVector(Vector v) : values(std::move(v)), clamped_mask(values.size(), false) {
    for (std::size_t i = 0; i < values.size(); ++i) clamped_mask[i] = values[i] == 0.0;
  }

  static ClampedVector filled(std::size_t n, double value) { return ClampedVector(Vector(n, value)); }
  static ClampedVector zeros(std::size_t n) { return filled(n, 0.0); }

  std::size_t size() const noexcept { return values.size(); }

  // Zeroes every component with |v| < threshold and marks it clamped.
  void clamp(double threshold) {
    clamped_mask.resize(values.size(), false);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (clamped_mask[i] || std::abs(values[i]) < threshold) {
        values[i] = 0.0;
        clamped_mask[i] = true;
      }
    }
  }

  bool operator==(const ClampedVector&) const = default;
};

using StateVector = ClampedVector<struct StateTag>;
using CauseVector = ClampedVector<struct CauseTag>;

// The N vectorized measurements of one frame at one layer.
struct PatchBatch {
  std::size_t t = 0;
  std::vector<Vector> patches;

  std::size_t size() const noexcept { return patches.size(); }
  std::size_t patch_length() const noexcept { return patches.empty() ? 0 : patches.front().size(); }
};

// gamma * sum_n |x_n|, with gamma folded in at construction.
struct PooledStateMagnitude {
  Vector xt_abs;

  static PooledStateMagnitude from_states(std::span<const StateVector> states, double gamma);
};

// Per-patch terms of the state objective. `x_prev` may be null, which drops
// the temporal term (first frame).
double eval_Ex_patch(const Vector& y, const Vector& x, const Vector* x_prev, const LayerModel& model,
                     const HyperParams& hp);

// sum_n 0.5||y_n - C x_n||^2 + mu||x_n||_1 + lambda||x_n - A x_{t-1,n}||_1.
// An empty `prev_states` means there is no previous frame.
double eval_Ex(const PatchBatch& batch, std::span<const StateVector> states,
               std::span<const StateVector> prev_states, const LayerModel& model, const HyperParams& hp);

// |X_t|^T (1 + exp(-B u)) + beta ||u||_1.
double eval_Eu(const CauseVector& cause, const PooledStateMagnitude& pooled, const LayerModel& model,
               const HyperParams& hp);
double eval_Eu(const Vector& u, const Vector& pooled, const Matrix& b, double beta);

double eval_Ep(const PatchBatch& batch, std::span<const StateVector> states,
               std::span<const StateVector> prev_states, const CauseVector& cause, const LayerModel& model,
               const HyperParams& hp);

// exp(-z) with the argument clipped to [-700, 700].
double guarded_exp_neg(double z);

}  // namespace mmdpcn
