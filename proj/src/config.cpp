#include "mmdpcn/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "mmdpcn/errors.hpp"
#include "mmdpcn/io.hpp"
#include "mmdpcn/metrics.hpp"

namespace mmdpcn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size(), ErrorKind::ConfigError,
          "'" + key + "' expects a number, got '" + v + "'");
  return out;
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size(), ErrorKind::ConfigError,
          "'" + key + "' expects a nonnegative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::ConfigError, "'" + key + "' expects true/false, got '" + v + "'");
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;
using Table = std::map<std::string, Setter>;

template <typename T>
Setter number(T& field) {
  return [&field](const std::string& k, const std::string& v) {
    if constexpr (std::is_floating_point_v<T>)
      field = to_double(k, v);
    else
      field = static_cast<T>(to_count(k, v));
  };
}

void apply(const std::string& section, const std::map<std::string, std::string>& values, const Table& table) {
  for (const auto& [k, v] : values) {
    const auto it = table.find(k);
    require(it != table.end(), ErrorKind::ConfigError, "unknown key '" + k + "' in [" + section + "]");
    it->second(k, v);
  }
}

void hp_keys(Table& t, HyperParams& hp) {
  t["mu"] = number(hp.mu);
  t["lambda"] = number(hp.lambda);
  t["gamma"] = number(hp.gamma);
  t["beta"] = number(hp.beta);
  t["m_smooth"] = number(hp.m_smooth);
  t["clamp_state"] = number(hp.clamp_state);
  t["clamp_cause"] = number(hp.clamp_cause);
  t["i_s"] = number(hp.i_s);
  t["j_s"] = number(hp.j_s);
  t["inner_tol"] = number(hp.inner_tol);
  t["max_inner_iter"] = number(hp.max_inner_iter);
}

bool is_layer_section(const std::string& name, std::size_t& index) {
  if (name.rfind("layer", 0) != 0 || name.size() == 5) return false;
  const std::string digits = name.substr(5);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || v == 0) return false;
  index = static_cast<std::size_t>(v - 1);
  return true;
}

void emit(std::ostringstream& os, const std::string& key, double v) { os << key << " = " << format_double(v) << "\n"; }
void emit(std::ostringstream& os, const std::string& key, std::size_t v) { os << key << " = " << v << "\n"; }

void emit_hp(std::ostringstream& os, const HyperParams& hp) {
  emit(os, "mu", hp.mu);
  emit(os, "lambda", hp.lambda);
  emit(os, "gamma", hp.gamma);
  emit(os, "beta", hp.beta);
  emit(os, "m_smooth", hp.m_smooth);
  emit(os, "clamp_state", hp.clamp_state);
  emit(os, "clamp_cause", hp.clamp_cause);
  emit(os, "i_s", hp.i_s);
  emit(os, "j_s", hp.j_s);
  emit(os, "inner_tol", hp.inner_tol);
  emit(os, "max_inner_iter", hp.max_inner_iter);
}

}  // namespace

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find('x');
  require(x != std::string::npos, ErrorKind::ConfigError, "grid must look like RxC, got '" + text + "'");
  const auto rows = to_count("grid", text.substr(0, x));
  const auto cols = to_count("grid", text.substr(x + 1));
  require(rows > 0 && cols > 0, ErrorKind::ConfigError, "grid dimensions must be positive");
  return {static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)};
}

ConfigSections parse_config_text(const std::string& text) {
  ConfigSections out;
  std::string section = "network";
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      require(line.back() == ']' && line.size() > 2, ErrorKind::ConfigError, where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::ConfigError, where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty() && !value.empty(), ErrorKind::ConfigError, where + "empty key or value");
    require(!out[section].contains(key), ErrorKind::ConfigError, where + "duplicate key '" + key + "'");
    out[section][key] = value;
  }
  return out;
}

ExperimentConfig build_config(const ConfigSections& sections) {
  ExperimentConfig cfg = default_config();

  std::size_t layer_count = 0;
  for (const auto& [name, values] : sections) {
    std::size_t index = 0;
    if (is_layer_section(name, index)) layer_count = std::max(layer_count, index + 1);
  }
  if (layer_count > 0) {
    // Layers listed in the file replace the defaults; missing layers in the
    // middle of the numbering are an error.
    for (std::size_t l = 0; l < layer_count; ++l)
      require(sections.contains("layer" + std::to_string(l + 1)), ErrorKind::ConfigError,
              "missing section [layer" + std::to_string(l + 1) + "]");
    cfg.network.layers.assign(layer_count, LayerConfig{});
  }

  for (const auto& [name, values] : sections) {
    Table t;
    std::size_t index = 0;
    if (name == "network") {
      NetworkConfig& n = cfg.network;
      t["grid"] = [&n](const std::string&, const std::string& v) {
        std::tie(n.grid_rows, n.grid_cols) = parse_grid(v);
      };
      t["channels"] = number(n.channels);
      t["grayscale"] = [&n](const std::string& k, const std::string& v) { n.grayscale = to_bool(k, v); };
      t["parallel"] = [&n](const std::string& k, const std::string& v) { n.parallel = to_bool(k, v); };
      t["sweep_cap"] = number(n.sweep_cap);
      t["fista_max_iter"] = number(n.fista_max_iter);
      t["state_solver"] = [&n](const std::string&, const std::string& v) {
        if (v == "mm")
          n.state_solver = StateSolver::Mm;
        else if (v == "fista")
          n.state_solver = StateSolver::Fista;
        else
          fail(ErrorKind::ConfigError, "state_solver must be mm or fista");
      };
      t["seed"] = number(cfg.seed);
      t["k"] = number(cfg.cluster_k);
    } else if (is_layer_section(name, index)) {
      LayerConfig& l = cfg.network.layers[index];
      t["p"] = number(l.dims.p);
      t["k"] = number(l.dims.k);
      t["d"] = number(l.dims.d);
      hp_keys(t, l.hp);
      t["lr"] = [&l](const std::string& k, const std::string& v) {
        l.learn.lr_a = l.learn.lr_b = l.learn.lr_c = to_double(k, v);
      };
      t["lr_a"] = number(l.learn.lr_a);
      t["lr_b"] = number(l.learn.lr_b);
      t["lr_c"] = number(l.learn.lr_c);
      t["theta_prox"] = number(l.learn.theta_prox);
      t["outer_tol"] = number(l.learn.outer_tol);
      t["max_outer_iter"] = number(l.learn.max_outer_iter);
      t["seed"] = number(l.learn.seed);
    } else if (name == "bench") {
      BenchConfig& b = cfg.bench;
      t["p"] = number(b.data.p);
      t["k"] = number(b.data.k);
      t["count"] = number(b.data.count);
      t["density"] = number(b.data.density);
      t["amp_lo"] = number(b.data.amp_lo);
      t["amp_hi"] = number(b.data.amp_hi);
      t["noise"] = number(b.data.noise);
      hp_keys(t, b.hp);
      t["step"] = number(b.baseline.step);
      t["max_iter"] = number(b.baseline.max_iter);
      t["tol"] = number(b.baseline.tol);
      t["adam_beta1"] = number(b.baseline.adam_beta1);
      t["adam_beta2"] = number(b.baseline.adam_beta2);
      t["adam_eps"] = number(b.baseline.adam_eps);
      t["threads"] = number(b.threads);
      t["patches_dir"] = [&b](const std::string&, const std::string& v) { b.patches_dir = v; };
    } else if (name == "shapes") {
      ShapesSpec& s = cfg.shapes;
      t["frames_per_shape"] = number(s.frames_per_shape);
      t["size"] = number(s.size);
      t["grid"] = number(s.grid);
      t["hold"] = number(s.hold);
      t["max_shift"] = number(s.max_shift);
      t["noise"] = number(s.noise);
    } else {
      fail(ErrorKind::ConfigError, "unknown section [" + name + "]");
    }
    apply(name, values, t);
  }

  NetworkConfig& n = cfg.network;
  for (std::size_t l = 0; l < n.layers.size(); ++l) n.layers[l].dims.n = l == 0 ? n.grid_rows * n.grid_cols : 1;
  n.validate();
  cfg.bench.hp.validate();
  cfg.bench.baseline.validate();
  require(cfg.cluster_k >= 1, ErrorKind::ConfigError, "k must be at least 1");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) { return build_config(parse_config_text(read_text(path))); }

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  NetworkConfig& n = cfg.network;
  n.grid_rows = n.grid_cols = 2;

  LayerConfig l1;
  l1.dims = {64, 100, 20, 4};
  l1.hp.mu = 0.3;
  l1.hp.gamma = 3.0;
  l1.hp.beta = 0.3;
  l1.hp.lambda = 0.1;
  l1.learn.max_outer_iter = 1;

  LayerConfig l2;
  l2.dims = {20, 40, 6, 1};
  l2.hp.mu = 0.3;
  l2.hp.gamma = 100.0;
  l2.hp.beta = 10.0;
  l2.hp.lambda = 0.1;
  l2.learn.max_outer_iter = 1;
  l2.learn.seed = 1;

  n.layers = {l1, l2};
  return cfg;
}

std::string format_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const NetworkConfig& n = cfg.network;
  os << "[network]\n";
  os << "grid = " << n.grid_rows << "x" << n.grid_cols << "\n";
  emit(os, "channels", n.channels);
  os << "grayscale = " << (n.grayscale ? "true" : "false") << "\n";
  os << "parallel = " << (n.parallel ? "true" : "false") << "\n";
  emit(os, "sweep_cap", n.sweep_cap);
  os << "state_solver = " << (n.state_solver == StateSolver::Mm ? "mm" : "fista") << "\n";
  emit(os, "fista_max_iter", n.fista_max_iter);
  os << "seed = " << cfg.seed << "\n";
  emit(os, "k", cfg.cluster_k);
  for (std::size_t l = 0; l < n.layers.size(); ++l) {
    const LayerConfig& lc = n.layers[l];
    os << "\n[layer" << l + 1 << "]\n";
    emit(os, "p", lc.dims.p);
    emit(os, "k", lc.dims.k);
    emit(os, "d", lc.dims.d);
    emit_hp(os, lc.hp);
    emit(os, "lr_a", lc.learn.lr_a);
    emit(os, "lr_b", lc.learn.lr_b);
    emit(os, "lr_c", lc.learn.lr_c);
    emit(os, "theta_prox", lc.learn.theta_prox);
    emit(os, "outer_tol", lc.learn.outer_tol);
    emit(os, "max_outer_iter", lc.learn.max_outer_iter);
    os << "seed = " << lc.learn.seed << "\n";
  }
  const BenchConfig& b = cfg.bench;
  os << "\n[bench]\n";
  emit(os, "p", b.data.p);
  emit(os, "k", b.data.k);
  emit(os, "count", b.data.count);
  emit(os, "density", b.data.density);
  emit(os, "amp_lo", b.data.amp_lo);
  emit(os, "amp_hi", b.data.amp_hi);
  emit(os, "noise", b.data.noise);
  emit_hp(os, b.hp);
  emit(os, "step", b.baseline.step);
  emit(os, "max_iter", b.baseline.max_iter);
  emit(os, "tol", b.baseline.tol);
  emit(os, "adam_beta1", b.baseline.adam_beta1);
  emit(os, "adam_beta2", b.baseline.adam_beta2);
  emit(os, "adam_eps", b.baseline.adam_eps);
  emit(os, "threads", b.threads);
  if (!b.patches_dir.empty()) os << "patches_dir = " << b.patches_dir << "\n";
  const ShapesSpec& s = cfg.shapes;
  os << "\n[shapes]\n";
  emit(os, "frames_per_shape", s.frames_per_shape);
  emit(os, "size", s.size);
  emit(os, "grid", s.grid);
  emit(os, "hold", s.hold);
  emit(os, "max_shift", s.max_shift);
  emit(os, "noise", s.noise);
  return os.str();
}

}  // namespace mmdpcn
