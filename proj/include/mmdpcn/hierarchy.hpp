#pragma once

// Layer stacking: frames are cut into patches for layer 1, every upper layer
// sees the cause vector of the layer below as a single patch. Training is
// greedy, one layer at a time; inference alternates bottom-up passes with
// top-down cause predictions.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmdpcn/learn.hpp"
#include "mmdpcn/synthetic.hpp"

namespace mmdpcn {

struct LayerConfig {
  LayerDims dims;
  HyperParams hp;
  LearnConfig learn;
};

enum class StateSolver { Mm, Fista };

struct NetworkConfig {
  std::vector<LayerConfig> layers;
  std::size_t grid_rows = 2;
  std::size_t grid_cols = 2;
  std::size_t channels = 1;
  bool grayscale = false;
  std::size_t sweep_cap = 10;
  bool parallel = false;
  StateSolver state_solver = StateSolver::Mm;  // inference only
  std::size_t fista_max_iter = 20000;

  // Checks dimension chaining; with nonzero frame sizes also the layer-1 patch length.
  void validate(std::size_t frame_h = 0, std::size_t frame_w = 0) const;
};

// Trained stack. Dims carry N (patches per frame) for each layer.
struct Network {
  std::vector<LayerDims> dims;
  std::vector<HyperParams> hps;
  std::vector<LayerModel> models;

  std::size_t depth() const noexcept { return models.size(); }
  bool operator==(const Network&) const = default;
};

struct LayerVariables {
  std::vector<StateVector> states;
  CauseVector cause;
};

// Per-layer variables for one frame.
struct NetworkState {
  std::vector<LayerVariables> layers;
};

PatchBatch decompose_frame(const Frame& frame, std::size_t grid_rows, std::size_t grid_cols, std::size_t t = 0);
Frame reassemble_frame(const PatchBatch& batch, std::size_t height, std::size_t width, std::size_t channels,
                       std::size_t grid_rows, std::size_t grid_cols);

// Luma average for 3-channel frames; 1-channel frames pass through.
Frame to_grayscale(const Frame& frame);

struct TrainResult {
  Network network;
  std::vector<FitReport> reports;
};

TrainResult train_network(const std::vector<Frame>& frames, const NetworkConfig& cfg);

struct InferenceResult {
  std::vector<NetworkState> frames;
  std::vector<double> frame_seconds;  // wall time of variable inference per frame
  std::vector<std::size_t> sweeps;

  // Top-layer cause of every frame.
  std::vector<Vector> top_causes() const;
};

InferenceResult infer_variables(const std::vector<Frame>& frames, const Network& network, const NetworkConfig& cfg);

// Layer-1 reconstruction C x, reassembled into frames.
std::vector<Frame> reconstruct_frames(const std::vector<Frame>& frames, const Network& network,
                                      const InferenceResult& vars, const NetworkConfig& cfg);

// Binary model file: "DPCN", u16 version, u16 layer count, then per layer
// u32 x4 dims, f64 x11 hyperparameters and A, B, C row-major, little endian.
void save_network(const Network& network, const std::string& path);
Network load_network(const std::string& path);

}  // namespace mmdpcn
