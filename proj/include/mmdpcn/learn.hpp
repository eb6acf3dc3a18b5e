#pragma once

// Model learning for one layer: interleaved state/cause inference on every
// frame, then one gradient step on {A, B, C}, repeated until E_p settles.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmdpcn/cause_infer.hpp"
#include "mmdpcn/majorizer.hpp"
#include "mmdpcn/model.hpp"
#include "mmdpcn/state_infer.hpp"

namespace mmdpcn {

struct LearnConfig {
  double lr_a = 1e-3;
  double lr_b = 1e-3;
  double lr_c = 1e-3;
  double theta_prox = 0.5;  // weight of 0.5||theta - theta_prev||^2
  double outer_tol = 1e-4;
  std::size_t max_outer_iter = 300;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ModelGrads {
  Matrix da;
  Matrix db;
  Matrix dc;
};

// E_p with the temporal l1 replaced by its smooth approximation; this is the
// objective the solvers and the gradients below actually work on.
double smoothed_Ep(const PatchBatch& batch, std::span<const StateVector> states,
                   std::span<const StateVector> prev_states, const CauseVector& cause, const LayerModel& model,
                   const HyperParams& hp);

// Gradients of smoothed_Ep with respect to A, B, C at fixed variables.
ModelGrads grad_model(const PatchBatch& batch, std::span<const StateVector> states,
                      std::span<const StateVector> prev_states, const CauseVector& cause,
                      const PooledStateMagnitude& pooled, const LayerModel& model, const HyperParams& hp);

// Accumulates `g` into `total`.
void accumulate(ModelGrads& total, const ModelGrads& g);

// theta - lr (grad + theta_prox (theta - theta_prev)), then unit columns for B and C.
LayerModel update_model(const LayerModel& model, const ModelGrads& grads, const LearnConfig& cfg,
                        const LayerModel& model_prev);

struct FrameVariables {
  std::vector<StateVector> states;
  CauseVector cause;
  std::size_t state_iterations = 0;  // largest per-patch count
  std::size_t cause_iterations = 0;
  bool converged = false;
};

// Alternates i_s state iterations and j_s cause iterations until both have
// converged. With `u_hat` the cause update is the top-down form.
FrameVariables infer_frame(const PatchBatch& batch, std::span<const StateVector> prev_states,
                           const LayerModel& model, const HyperParams& hp, const WoodburySolver& solver,
                           const Vector* u_hat = nullptr, bool parallel = false);

struct FitReport {
  std::vector<double> ep_trace;  // smoothed E_p summed over frames, one per accepted step
  std::size_t outer_iterations = 0;
  std::size_t rejected_steps = 0;
  bool converged = false;
  double wall_time = 0.0;
};

struct FitResult {
  LayerModel model;
  std::vector<FrameVariables> variables;  // per frame, inferred under the returned model
  FitReport report;

  std::vector<CauseVector> causes() const;
};

// Runs the frames in order; frame t uses the states of frame t-1 for the
// temporal term. `init` overrides the seeded random start.
FitResult fit_layer(std::span<const PatchBatch> frames, const LayerDims& dims, const HyperParams& hp,
                    const LearnConfig& cfg, const std::optional<LayerModel>& init = std::nullopt);

// Infers every frame in order under a fixed model.
std::vector<FrameVariables> infer_sequence(std::span<const PatchBatch> frames, const LayerModel& model,
                                           const HyperParams& hp, bool parallel = false);

}  // namespace mmdpcn
