// Command-line front end: gen-shapes, bench, train, cluster, reconstruct.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mmdpcn/bench.hpp"
#include "mmdpcn/config.hpp"
#include "mmdpcn/errors.hpp"
#include "mmdpcn/hierarchy.hpp"
#include "mmdpcn/io.hpp"
#include "mmdpcn/metrics.hpp"

namespace fs = std::filesystem;
using namespace mmdpcn;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string grid;
  bool grayscale = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_frame_flags) {
  cmd->add_option("--config", c.config, "configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory")->required();
  cmd->add_option("--seed", c.seed, "random seed")->each([&c](const std::string&) { c.seed_given = true; });
  if (with_frame_flags) {
    cmd->add_option("--grid", c.grid, "patch grid RxC");
    cmd->add_flag("--grayscale", c.grayscale, "convert colour frames to luma before patching");
  }
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (c.seed_given) cfg.seed = c.seed;
  if (!c.grid.empty()) {
    std::tie(cfg.network.grid_rows, cfg.network.grid_cols) = parse_grid(c.grid);
    if (!cfg.network.layers.empty()) cfg.network.layers.front().dims.n = cfg.network.grid_rows * cfg.network.grid_cols;
  }
  if (c.grayscale) cfg.network.grayscale = true;
  return cfg;
}

fs::path prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  require(!ec, ErrorKind::IoError, "cannot create output directory " + out);
  return fs::path(out);
}

RunManifest manifest(const std::string& command, const Common& c, const ExperimentConfig& cfg,
                     std::vector<std::string> inputs) {
  RunManifest m;
  m.command = command;
  m.config_path = c.config;
  m.seed = cfg.seed;
  m.inputs = std::move(inputs);
  m.output_dir = c.out;
  m.version = version_string();
  m.started = utc_timestamp();
  return m;
}

void finish(RunManifest& m, const fs::path& out) {
  m.finished = utc_timestamp();
  write_manifest(m, out);
}

std::vector<std::string> split_methods(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Network config for inference with a stored model: grid, channels and
// solver from the run configuration, layers from the file.
NetworkConfig inference_config(const ExperimentConfig& cfg, const Network& net, const Frame& first) {
  NetworkConfig nc = cfg.network;
  nc.layers.clear();
  for (std::size_t l = 0; l < net.depth(); ++l) nc.layers.push_back({net.dims[l], net.hps[l], LearnConfig{}});
  nc.channels = first.channels;
  require(net.dims.front().n == nc.grid_rows * nc.grid_cols, ErrorKind::GridMismatch,
          "model was trained with " + std::to_string(net.dims.front().n) + " patches per frame, grid gives " +
              std::to_string(nc.grid_rows * nc.grid_cols));
  nc.validate(first.height, first.width);
  return nc;
}

int cmd_gen_shapes(const Common& c, std::size_t frames_per_shape, std::size_t size) {
  ExperimentConfig cfg = resolve(c);
  RunManifest m = manifest("gen-shapes", c, cfg, {});
  const fs::path out = prepare_out(c.out);
  ShapesSpec spec = cfg.shapes;
  if (frames_per_shape > 0) spec.frames_per_shape = frames_per_shape;
  if (size > 0) spec.size = size;
  spec.seed = cfg.seed;
  const ShapesDataset data = make_shapes(spec);
  save_frames_dir(data.frames, out / "frames");
  write_labels_csv(data.labels, out / "labels.csv");
  finish(m, out);
  std::cout << "wrote " << data.frames.size() << " frames to " << (out / "frames").string() << "\n";
  return 0;
}

int cmd_bench(const Common& c, const std::string& methods_text, const std::string& patches) {
  ExperimentConfig cfg = resolve(c);
  if (!patches.empty()) cfg.bench.patches_dir = patches;
  const auto methods = split_methods(methods_text);
  std::vector<std::string> inputs;
  if (!cfg.bench.patches_dir.empty()) inputs.push_back(cfg.bench.patches_dir);
  RunManifest m = manifest("bench", c, cfg, inputs);
  const fs::path out = prepare_out(c.out);

  const BenchInput input = bench_input(cfg.bench, cfg.seed);
  const BenchReport report = run_bench(input, cfg.bench, methods);
  write_metrics_csv((out / "bench.csv").string(), report.metric_rows());
  write_metrics_csv((out / "timing.csv").string(), report.timing_rows());
  fs::create_directories(out / "traces");
  for (const auto& r : report.runs) write_text(out / "traces" / (r.method + ".csv"), trace_csv(r));
  finish(m, out);
  for (const auto& row : report.metric_rows())
    std::printf("%-22s %.6g +- %.3g\n", row.metric.c_str(), row.value, row.stddev);
  return 0;
}

int cmd_train(const Common& c, const std::string& frames_dir) {
  ExperimentConfig cfg = resolve(c);
  RunManifest m = manifest("train", c, cfg, {frames_dir});
  const fs::path out = prepare_out(c.out);
  const std::vector<Frame> frames = load_frames_dir(frames_dir);
  require(!frames.empty(), ErrorKind::EmptyVector, "no frames in " + frames_dir);
  cfg.network.channels = frames.front().channels;
  for (auto& layer : cfg.network.layers) layer.learn.seed += cfg.seed;

  const TrainResult trained = train_network(frames, cfg.network);
  save_network(trained.network, (out / "model.dpcn").string());

  std::ostringstream fit;
  fit << "layer,step,ep\n";
  std::vector<MetricRow> timing;
  for (std::size_t l = 0; l < trained.reports.size(); ++l) {
    const FitReport& r = trained.reports[l];
    for (std::size_t i = 0; i < r.ep_trace.size(); ++i) fit << l + 1 << "," << i << "," << format_double(r.ep_trace[i]) << "\n";
    timing.push_back({"layer" + std::to_string(l + 1) + ".train_seconds", r.wall_time, 0.0});
  }
  write_text(out / "fit_report.csv", fit.str());
  write_metrics_csv((out / "timing.csv").string(), timing);
  write_text(out / "config.txt", format_config(cfg));
  finish(m, out);
  for (std::size_t l = 0; l < trained.reports.size(); ++l) {
    const FitReport& r = trained.reports[l];
    std::printf("layer %zu: %zu outer steps (%zu rejected), E_p %.6g -> %.6g, %.2f s\n", l + 1, r.outer_iterations,
                r.rejected_steps, r.ep_trace.front(), r.ep_trace.back(), r.wall_time);
  }
  return 0;
}

int cmd_cluster(const Common& c, const std::string& model_path, const std::string& frames_dir,
                const std::string& labels_path, std::size_t k) {
  ExperimentConfig cfg = resolve(c);
  if (k > 0) cfg.cluster_k = k;
  RunManifest m = manifest("cluster", c, cfg, {model_path, frames_dir, labels_path});
  const fs::path out = prepare_out(c.out);
  const Network net = load_network(model_path);
  const std::vector<Frame> frames = load_frames_dir(frames_dir);
  const std::vector<int> labels = read_labels_csv(labels_path);
  require(!frames.empty(), ErrorKind::EmptyVector, "no frames in " + frames_dir);
  require(labels.size() == frames.size(), ErrorKind::LengthMismatch, "labels and frames differ in count");
  const NetworkConfig nc = inference_config(cfg, net, frames.front());

  const InferenceResult vars = infer_variables(frames, net, nc);
  const ClusterReport report = cluster_top_causes(vars, labels, cfg.cluster_k, cfg.seed, net.hps.back().clamp_cause);
  write_metrics_csv((out / "metrics.csv").string(), report.rows());
  write_metrics_csv((out / "timing.csv").string(), report.timing_rows());
  std::ostringstream assign;
  assign << "frame_index,cluster\n";
  for (std::size_t t = 0; t < report.assignments.size(); ++t) assign << t << "," << report.assignments[t] << "\n";
  write_text(out / "assignments.csv", assign.str());
  std::ostringstream causes;
  const auto tops = vars.top_causes();
  causes << "frame_index";
  for (std::size_t j = 0; j < tops.front().size(); ++j) causes << ",u" << j;
  causes << "\n";
  for (std::size_t t = 0; t < tops.size(); ++t) {
    causes << t;
    for (double v : tops[t]) causes << "," << format_double(v);
    causes << "\n";
  }
  write_text(out / "causes.csv", causes.str());
  finish(m, out);
  std::printf("ACC %.4f  ARI %.4f  SPA %.2f  Hungarian %.4f  LCT %.4g s/frame\n", report.acc, report.ari, report.spa,
              report.hungarian_acc, report.lct_seconds);
  return 0;
}

int cmd_reconstruct(const Common& c, const std::string& model_path, const std::string& frames_dir) {
  ExperimentConfig cfg = resolve(c);
  RunManifest m = manifest("reconstruct", c, cfg, {model_path, frames_dir});
  const fs::path out = prepare_out(c.out);
  const Network net = load_network(model_path);
  const std::vector<Frame> frames = load_frames_dir(frames_dir);

  std::ostringstream per_frame;
  per_frame << "frame_index,mse\n";
  std::vector<double> mse;
  std::vector<Frame> rec;
  if (!frames.empty()) {
    const NetworkConfig nc = inference_config(cfg, net, frames.front());
    const InferenceResult vars = infer_variables(frames, net, nc);
    rec = reconstruct_frames(frames, net, vars, nc);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const Frame f = nc.grayscale ? to_grayscale(frames[t]) : frames[t];
      mse.push_back(mean_squared_error(f.pixels, rec[t].pixels));
      per_frame << t << "," << format_double(mse.back()) << "\n";
    }
  }
  save_frames_dir(rec, out / "frames");
  write_text(out / "mse.csv", per_frame.str());
  const std::vector<MetricRow> rows{summarize("mse", mse)};
  write_metrics_csv((out / "metrics.csv").string(), rows);
  finish(m, out);
  std::printf("reconstructed %zu frames, mean MSE %.6g\n", rec.size(), rows.front().value);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse predictive coding networks with majorization-minimization inference"};
  app.require_subcommand(1);

  Common gen_c, bench_c, train_c, cluster_c, rec_c;
  std::size_t frames_per_shape = 0, size = 0, k = 0;
  std::string methods = "mm,adam,fista,ista", patches, model, frames, labels;

  auto* gen = app.add_subcommand("gen-shapes", "write the moving-shapes video and its labels");
  add_common(gen, gen_c, false);
  gen->add_option("--frames-per-shape", frames_per_shape, "frames per shape block");
  gen->add_option("--size", size, "frame side length (>= 16)");

  auto* bench = app.add_subcommand("bench", "compare MM with ISTA, FISTA and Adam on sparse coding");
  add_common(bench, bench_c, false);
  bench->add_option("--methods", methods, "comma-separated subset of mm,ista,fista,adam");
  bench->add_option("--patches", patches, "directory of frames cut into patches instead of synthetic data")
      ->check(CLI::ExistingDirectory);

  auto* train = app.add_subcommand("train", "train the network layer by layer");
  add_common(train, train_c, true);
  train->add_option("frames", frames, "frames directory")->required()->check(CLI::ExistingDirectory);

  auto* cluster = app.add_subcommand("cluster", "cluster top-layer causes and score them against labels");
  add_common(cluster, cluster_c, true);
  cluster->add_option("model", model, "model file")->required()->check(CLI::ExistingFile);
  cluster->add_option("frames", frames, "frames directory")->required()->check(CLI::ExistingDirectory);
  cluster->add_option("labels", labels, "labels CSV")->required()->check(CLI::ExistingFile);
  cluster->add_option("--k", k, "number of clusters");

  auto* rec = app.add_subcommand("reconstruct", "reconstruct frames through layer 1");
  add_common(rec, rec_c, true);
  rec->add_option("model", model, "model file")->required()->check(CLI::ExistingFile);
  rec->add_option("frames", frames, "frames directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_shapes(gen_c, frames_per_shape, size);
    if (bench->parsed()) return cmd_bench(bench_c, methods, patches);
    if (train->parsed()) return cmd_train(train_c, frames);
    if (cluster->parsed()) return cmd_cluster(cluster_c, model, frames, labels, k);
    if (rec->parsed()) return cmd_reconstruct(rec_c, model, frames);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
