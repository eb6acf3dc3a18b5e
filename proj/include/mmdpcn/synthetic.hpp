#pragma once

// Synthetic workloads: sparse-generative patches for solver benchmarks and
// the moving-shapes video used for end-to-end clustering.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mmdpcn/model.hpp"

namespace mmdpcn {

struct SparseGenerativeSpec {
  std::size_t p = 256;
  std::size_t k = 300;
  std::size_t count = 20;  // number of patches
  double density = 0.1;    // fraction of active generating components
  double amp_lo = 20.0;    // |amplitude| ~ U(amp_lo, amp_hi), random sign
  double amp_hi = 100.0;
  double noise = 0.1;  // std of additive Gaussian noise
  std::uint64_t seed = 0;
};

struct SparseGenerativeData {
  Matrix c;  // unit-column dictionary, P x K
  std::vector<Vector> patches;
  std::vector<Vector> codes;  // generating sparse codes
};

SparseGenerativeData make_sparse_generative(const SparseGenerativeSpec& spec);

// A grayscale frame in [0, 1], row-major.
struct Frame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;  // (row * width + col) * channels + ch

  bool operator==(const Frame&) const = default;
};

enum class Shape { Diamond = 0, Triangle = 1, Square = 2 };

struct ShapesSpec {
  std::size_t frames_per_shape = 100;
  std::size_t size = 16;       // frame side length
  std::size_t grid = 2;        // shapes live inside one grid cell
  std::size_t hold = 4;        // frames between position changes
  std::size_t max_shift = 2;   // drift range inside the cell, pixels
  double noise = 0.02;         // std of additive Gaussian noise (clipped to [0, 1])
  std::uint64_t seed = 0;
};

struct ShapesDataset {
  std::vector<Frame> frames;
  std::vector<int> labels;
};

// Blocks of frames_per_shape frames per shape in the order diamond, triangle,
// square. Within a block the shape sits in one randomly chosen grid cell and
// drifts by up to max_shift pixels every `hold` frames.
ShapesDataset make_shapes(const ShapesSpec& spec);

}  // namespace mmdpcn
