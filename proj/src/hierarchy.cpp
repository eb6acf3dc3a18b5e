#include "mmdpcn/hierarchy.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "mmdpcn/baselines.hpp"
#include "mmdpcn/errors.hpp"

namespace mmdpcn {

namespace {

using Clock = std::chrono::steady_clock;

constexpr char kMagic[4] = {'D', 'P', 'C', 'N'};
constexpr std::uint16_t kVersion = 1;

std::size_t effective_channels(const NetworkConfig& cfg) { return cfg.grayscale ? 1 : cfg.channels; }

Frame prepare(const Frame& f, const NetworkConfig& cfg) {
  Frame out = cfg.grayscale ? to_grayscale(f) : f;
  require(out.channels == effective_channels(cfg), ErrorKind::ShapeError,
          "frame has " + std::to_string(out.channels) + " channels, configuration expects " +
              std::to_string(effective_channels(cfg)));
  return out;
}

// One layer, one frame: states then causes, with an optional top-down target.
class LayerRunner {
 public:
  LayerRunner(const LayerModel& model, const HyperParams& hp, const NetworkConfig& cfg)
      : model_(model), hp_(hp), cfg_(cfg), solver_(model.c) {
    if (cfg.state_solver == StateSolver::Fista) {
      const double lip = lipschitz_constant(model.c) + (hp.lambda > 0.0 ? hp.lambda / hp.m_smooth : 0.0);
      fista_.method = BaselineMethod::Fista;
      fista_.step = 1.0 / lip;
      fista_.tol = hp.inner_tol;
      fista_.max_iter = cfg.fista_max_iter;
    }
  }

  LayerVariables full(const PatchBatch& batch, std::span<const StateVector> prev, const Vector* u_hat) const {
    if (cfg_.state_solver == StateSolver::Mm) {
      FrameVariables fv = infer_frame(batch, prev, model_, hp_, solver_, u_hat, cfg_.parallel);
      return {std::move(fv.states), std::move(fv.cause)};
    }
    LayerVariables out;
    for (std::size_t n = 0; n < batch.size(); ++n) {
      const StateVector* p = prev.empty() ? nullptr : &prev[n];
      out.states.push_back(fista_solve(batch.patches[n], p, model_, hp_, fista_).state);
    }
    out.cause = causes_only(out.states, u_hat);
    return out;
  }

  CauseVector causes_only(const std::vector<StateVector>& states, const Vector* u_hat) const {
    const auto pooled = PooledStateMagnitude::from_states(states, hp_.gamma);
    return u_hat != nullptr ? infer_cause_topdown(pooled, *u_hat, model_, hp_).cause
                            : infer_cause(pooled, model_, hp_).cause;
  }

 private:
  const LayerModel& model_;
  const HyperParams& hp_;
  const NetworkConfig& cfg_;
  WoodburySolver solver_;
  BaselineConfig fista_;
};

// Little-endian writers/readers.
void put_bytes(std::ostream& os, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::ostream& os, double v) { put_bytes(os, std::bit_cast<std::uint64_t>(v), 8); }

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}
  std::uint64_t take(int n) {
    require(pos_ + static_cast<std::size_t>(n) <= bytes_.size(), ErrorKind::FormatError, "model file is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  double f64() { return std::bit_cast<double>(take(8)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::size_t as_count(double v) {
  require(v >= 0.0 && v == std::floor(v) && v < 1e15, ErrorKind::FormatError, "model file: bad count field");
  return static_cast<std::size_t>(v);
}

}  // namespace

void NetworkConfig::validate(std::size_t frame_h, std::size_t frame_w) const {
  require(!layers.empty(), ErrorKind::ConfigError, "network needs at least one layer");
  require(grid_rows > 0 && grid_cols > 0, ErrorKind::ConfigError, "grid must be positive");
  require(channels == 1 || channels == 3, ErrorKind::ConfigError, "channels must be 1 or 3");
  require(sweep_cap >= 1, ErrorKind::ConfigError, "sweep_cap must be at least 1");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].dims.validate();
    layers[l].hp.validate();
    layers[l].learn.validate();
    const std::size_t expected_n = l == 0 ? grid_rows * grid_cols : 1;
    require(layers[l].dims.n == expected_n, ErrorKind::ConfigError,
            "layer " + std::to_string(l + 1) + " expects n=" + std::to_string(expected_n));
    if (l > 0)
      require(layers[l].dims.p == layers[l - 1].dims.d, ErrorKind::ConfigError,
              "layer " + std::to_string(l + 1) + " input length must equal the cause length of the layer below");
  }
  if (frame_h > 0 || frame_w > 0) {
    require(frame_h % grid_rows == 0 && frame_w % grid_cols == 0, ErrorKind::GridMismatch,
            "frame size not divisible by the patch grid");
    const std::size_t p = (frame_h / grid_rows) * (frame_w / grid_cols) * (grayscale ? 1 : channels);
    require(layers[0].dims.p == p, ErrorKind::ConfigError,
            "layer 1 patch length must be " + std::to_string(p) + " for this frame size");
  }
}

PatchBatch decompose_frame(const Frame& frame, std::size_t grid_rows, std::size_t grid_cols, std::size_t t) {
  require(grid_rows > 0 && grid_cols > 0, ErrorKind::GridMismatch, "grid must be positive");
  require(frame.height % grid_rows == 0 && frame.width % grid_cols == 0, ErrorKind::GridMismatch,
          "frame " + std::to_string(frame.height) + "x" + std::to_string(frame.width) + " not divisible by grid " +
              std::to_string(grid_rows) + "x" + std::to_string(grid_cols));
  require(frame.pixels.size() == frame.height * frame.width * frame.channels, ErrorKind::ShapeError,
          "frame pixel count does not match its shape");
  const std::size_t ph = frame.height / grid_rows;
  const std::size_t pw = frame.width / grid_cols;
  const std::size_t ch = frame.channels;
  PatchBatch batch{t, {}};
  for (std::size_t gr = 0; gr < grid_rows; ++gr) {
    for (std::size_t gc = 0; gc < grid_cols; ++gc) {
      Vector patch(ph * pw * ch);
      std::size_t i = 0;
      for (std::size_t r = 0; r < ph; ++r)
        for (std::size_t c = 0; c < pw; ++c)
          for (std::size_t k = 0; k < ch; ++k)
            patch[i++] = frame.pixels[((gr * ph + r) * frame.width + gc * pw + c) * ch + k];
      batch.patches.push_back(std::move(patch));
    }
  }
  return batch;
}

Frame reassemble_frame(const PatchBatch& batch, std::size_t height, std::size_t width, std::size_t channels,
                       std::size_t grid_rows, std::size_t grid_cols) {
  require(grid_rows > 0 && grid_cols > 0 && height % grid_rows == 0 && width % grid_cols == 0,
          ErrorKind::GridMismatch, "frame size not divisible by grid");
  require(batch.size() == grid_rows * grid_cols, ErrorKind::GridMismatch, "patch count does not match grid");
  const std::size_t ph = height / grid_rows;
  const std::size_t pw = width / grid_cols;
  Frame frame{height, width, channels, std::vector<double>(height * width * channels, 0.0)};
  for (std::size_t gr = 0; gr < grid_rows; ++gr) {
    for (std::size_t gc = 0; gc < grid_cols; ++gc) {
      const Vector& patch = batch.patches[gr * grid_cols + gc];
      require(patch.size() == ph * pw * channels, ErrorKind::ShapeError, "patch length does not match frame shape");
      std::size_t i = 0;
      for (std::size_t r = 0; r < ph; ++r)
        for (std::size_t c = 0; c < pw; ++c)
          for (std::size_t k = 0; k < channels; ++k)
            frame.pixels[((gr * ph + r) * width + gc * pw + c) * channels + k] = patch[i++];
    }
  }
  return frame;
}

Frame to_grayscale(const Frame& frame) {
  if (frame.channels == 1) return frame;
  require(frame.channels == 3, ErrorKind::ShapeError, "grayscale conversion needs 1 or 3 channels");
  Frame out{frame.height, frame.width, 1, std::vector<double>(frame.height * frame.width)};
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = 0.299 * frame.pixels[3 * i] + 0.587 * frame.pixels[3 * i + 1] + 0.114 * frame.pixels[3 * i + 2];
  return out;
}

TrainResult train_network(const std::vector<Frame>& frames, const NetworkConfig& cfg) {
  require(!frames.empty(), ErrorKind::EmptyVector, "train_network: no frames");
  cfg.validate(frames.front().height, frames.front().width);

  std::vector<PatchBatch> inputs;
  inputs.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t)
    inputs.push_back(decompose_frame(prepare(frames[t], cfg), cfg.grid_rows, cfg.grid_cols, t));

  TrainResult out;
  for (const auto& layer : cfg.layers) {
    FitResult fit = fit_layer(inputs, layer.dims, layer.hp, layer.learn);
    std::vector<PatchBatch> next;
    next.reserve(inputs.size());
    for (std::size_t t = 0; t < fit.variables.size(); ++t) next.push_back({t, {fit.variables[t].cause.values}});
    out.network.dims.push_back(layer.dims);
    out.network.hps.push_back(layer.hp);
    out.network.models.push_back(std::move(fit.model));
    out.reports.push_back(std::move(fit.report));
    inputs = std::move(next);
  }
  return out;
}

std::vector<Vector> InferenceResult::top_causes() const {
  std::vector<Vector> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.layers.back().cause.values);
  return out;
}

InferenceResult infer_variables(const std::vector<Frame>& frames, const Network& network, const NetworkConfig& cfg) {
  const std::size_t depth = network.depth();
  require(depth > 0 && network.dims.size() == depth && network.hps.size() == depth, ErrorKind::ShapeError,
          "network is empty or inconsistent");
  for (std::size_t l = 0; l < depth; ++l) network.models[l].check(network.dims[l]);

  std::vector<LayerRunner> runners;
  runners.reserve(depth);
  for (std::size_t l = 0; l < depth; ++l) runners.emplace_back(network.models[l], network.hps[l], cfg);

  InferenceResult out;
  out.frames.reserve(frames.size());
  const NetworkState* prev = nullptr;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto t0 = Clock::now();
    const PatchBatch base = decompose_frame(prepare(frames[t], cfg), cfg.grid_rows, cfg.grid_cols, t);
    require(base.patch_length() == network.dims[0].p, ErrorKind::DimensionMismatch,
            "frame patches do not match layer 1 input length");

    NetworkState cur;
    cur.layers.resize(depth);
    std::size_t sweeps = 0;
    for (std::size_t sweep = 0; sweep < cfg.sweep_cap; ++sweep) {
      ++sweeps;
      double change = 0.0;
      double scale = 1.0;
      bool input_changed = sweep == 0;
      for (std::size_t l = 0; l < depth; ++l) {
        std::span<const StateVector> prev_states;
        if (prev != nullptr) prev_states = prev->layers[l].states;

        // Before the first frame every state and cause is taken as zero, so
        // the prediction there is zero at every layer.
        Vector u_hat(network.dims[l].d);
        if (prev != nullptr) {
          if (l + 1 == depth) {
            u_hat = prev->layers[l].cause.values;
          } else {
            const CauseVector& upper_u = sweep == 0 ? prev->layers[l + 1].cause : cur.layers[l + 1].cause;
            u_hat = top_down_prediction(network.models[l + 1], prev->layers[l + 1].states.front(), upper_u,
                                        network.hps[l + 1])
                        .u_hat;
          }
        }
        const Vector* hat = &u_hat;

        const CauseVector old = cur.layers[l].cause;
        if (input_changed) {
          const PatchBatch input = l == 0 ? base : PatchBatch{t, {cur.layers[l - 1].cause.values}};
          cur.layers[l] = runners[l].full(input, prev_states, hat);
        } else {
          cur.layers[l].cause = runners[l].causes_only(cur.layers[l].states, hat);
        }
        if (sweep > 0) {
          change = std::max(change, norm_inf(cur.layers[l].cause.values - old.values));
          scale = std::max(scale, norm_inf(cur.layers[l].cause.values));
        }
        // The next layer's input is this layer's cause.
        input_changed = sweep == 0 || cur.layers[l].cause.values != old.values;
      }
      if (depth == 1 || prev == nullptr) break;
      if (sweep > 0 && change <= network.hps.back().inner_tol * scale) break;
    }

    out.frame_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    out.sweeps.push_back(sweeps);
    out.frames.push_back(std::move(cur));
    prev = &out.frames.back();
  }
  return out;
}

std::vector<Frame> reconstruct_frames(const std::vector<Frame>& frames, const Network& network,
                                      const InferenceResult& vars, const NetworkConfig& cfg) {
  require(frames.size() == vars.frames.size(), ErrorKind::LengthMismatch, "one inference result per frame");
  std::vector<Frame> out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Frame f = prepare(frames[t], cfg);
    PatchBatch rec{t, {}};
    for (const auto& s : vars.frames[t].layers.front().states) rec.patches.push_back(matvec(network.models[0].c, s.values));
    out.push_back(reassemble_frame(rec, f.height, f.width, f.channels, cfg.grid_rows, cfg.grid_cols));
  }
  return out;
}

void save_network(const Network& network, const std::string& path) {
  require(network.dims.size() == network.depth() && network.hps.size() == network.depth(), ErrorKind::ShapeError,
          "network is inconsistent");
  require(network.depth() <= std::numeric_limits<std::uint16_t>::max(), ErrorKind::ShapeError, "too many layers");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  put_bytes(os, kVersion, 2);
  put_bytes(os, network.depth(), 2);
  for (std::size_t l = 0; l < network.depth(); ++l) {
    const LayerDims& d = network.dims[l];
    network.models[l].check(d);
    for (std::size_t v : {d.p, d.k, d.d, d.n}) {
      require(v <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::ShapeError, "dimension exceeds u32");
      put_bytes(os, v, 4);
    }
    const HyperParams& h = network.hps[l];
    for (double v : {h.mu, h.lambda, h.gamma, h.beta, h.m_smooth, h.clamp_state, h.clamp_cause,
                     static_cast<double>(h.i_s), static_cast<double>(h.j_s), h.inner_tol,
                     static_cast<double>(h.max_inner_iter)})
      put_f64(os, v);
    for (const Matrix* m : {&network.models[l].a, &network.models[l].b, &network.models[l].c})
      for (double v : m->values()) put_f64(os, v);
  }
  os.flush();
  require(static_cast<bool>(os), ErrorKind::IoError, "write to '" + path + "' failed");
}

Network load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::IoError, "cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader rd(std::move(bytes));
  for (char c : kMagic) require(static_cast<char>(rd.take(1)) == c, ErrorKind::FormatError, "bad model file magic");
  const auto version = rd.take(2);
  require(version == kVersion, ErrorKind::FormatError, "unsupported model file version " + std::to_string(version));
  const auto depth = rd.take(2);
  require(depth > 0, ErrorKind::FormatError, "model file has no layers");

  Network net;
  for (std::size_t l = 0; l < depth; ++l) {
    LayerDims d;
    d.p = rd.take(4);
    d.k = rd.take(4);
    d.d = rd.take(4);
    d.n = rd.take(4);
    require(d.p > 0 && d.k > 0 && d.d > 0 && d.n > 0, ErrorKind::ShapeError, "model file: zero dimension");
    if (l > 0) require(d.p == net.dims.back().d, ErrorKind::ShapeError, "model file: layer dimensions do not chain");
    HyperParams h;
    h.mu = rd.f64();
    h.lambda = rd.f64();
    h.gamma = rd.f64();
    h.beta = rd.f64();
    h.m_smooth = rd.f64();
    h.clamp_state = rd.f64();
    h.clamp_cause = rd.f64();
    h.i_s = as_count(rd.f64());
    h.j_s = as_count(rd.f64());
    h.inner_tol = rd.f64();
    h.max_inner_iter = as_count(rd.f64());
    auto read_matrix = [&](std::size_t rows, std::size_t cols) {
      std::vector<double> v(rows * cols);
      for (double& x : v) x = rd.f64();
      return Matrix(rows, cols, std::move(v));
    };
    LayerModel m;
    m.a = read_matrix(d.k, d.k);
    m.b = read_matrix(d.k, d.d);
    m.c = read_matrix(d.p, d.k);
    net.dims.push_back(d);
    net.hps.push_back(h);
    net.models.push_back(std::move(m));
  }
  require(rd.done(), ErrorKind::FormatError, "model file has trailing bytes");
  return net;
}

}  // namespace mmdpcn
