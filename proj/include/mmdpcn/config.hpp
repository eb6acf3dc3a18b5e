#pragma once

// Experiment configuration: flat key = value lines grouped under [section]
// headers. Sections: [network], [layer1], [layer2], ..., [bench], [shapes].
// Keys before the first header belong to [network]. '#' starts a comment.
// Unknown sections or keys are errors.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmdpcn/baselines.hpp"
#include "mmdpcn/hierarchy.hpp"
#include "mmdpcn/synthetic.hpp"

namespace mmdpcn {

struct BenchConfig {
  SparseGenerativeSpec data;
  HyperParams hp;  // lambda defaults to 0 here
  BaselineConfig baseline;
  std::string patches_dir;  // empty = synthetic data
  std::size_t threads = 1;

  BenchConfig() {
    hp.lambda = 0.0;
    baseline.tol = 0.0;
  }
};

struct ExperimentConfig {
  NetworkConfig network;
  BenchConfig bench;
  ShapesSpec shapes;
  std::uint64_t seed = 0;
  std::size_t cluster_k = 3;  // K-Means clusters for `cluster`
};

// Parsed but untyped: section -> key -> raw value.
using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

ConfigSections parse_config_text(const std::string& text);
ExperimentConfig build_config(const ConfigSections& sections);
ExperimentConfig load_config(const std::string& path);

// The configuration used when no --config is given: the 2-layer shapes
// network and the P=256, K=300 solver benchmark.
ExperimentConfig default_config();

// Writes every field back out in the same syntax.
std::string format_config(const ExperimentConfig& cfg);

// "RxC" -> (rows, cols).
std::pair<std::size_t, std::size_t> parse_grid(const std::string& text);

}  // namespace mmdpcn
