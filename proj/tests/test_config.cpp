#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mmdpcn/config.hpp"
#include "mmdpcn/errors.hpp"

using namespace mmdpcn;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidArgument;
}

ExperimentConfig from_text(const std::string& text) { return build_config(parse_config_text(text)); }

}  // namespace

TEST_CASE("default configuration") {
  const ExperimentConfig cfg = default_config();
  REQUIRE(cfg.network.layers.size() == 2);
  CHECK(cfg.network.layers[0].dims.p == 64);
  CHECK(cfg.network.layers[1].dims.p == cfg.network.layers[0].dims.d);
  CHECK(cfg.bench.data.p == 256);
  CHECK(cfg.bench.data.k == 300);
  CHECK(cfg.bench.hp.lambda == 0.0);
  CHECK(cfg.cluster_k == 3);
  CHECK_NOTHROW(cfg.network.validate());
}

TEST_CASE("parsing sections, comments and keys") {
  const auto s = parse_config_text("seed = 4  # trailing\n\n[layer1]\nmu=0.5\n[bench]\n  count = 3\n");
  CHECK(s.at("network").at("seed") == "4");
  CHECK(s.at("layer1").at("mu") == "0.5");
  CHECK(s.at("bench").at("count") == "3");

  const ExperimentConfig cfg = from_text(
      "seed = 4\ngrid = 4x2\nstate_solver = fista\ngrayscale = true\n"
      "[layer1]\np = 16\nk = 20\nd = 4\nmu = 0.5\nlr = 0.01\n"
      "[bench]\ncount = 3\nstep = 0.02\n");
  CHECK(cfg.seed == 4);
  CHECK(cfg.network.grid_rows == 4);
  CHECK(cfg.network.grid_cols == 2);
  CHECK(cfg.network.state_solver == StateSolver::Fista);
  CHECK(cfg.network.grayscale);
  REQUIRE(cfg.network.layers.size() == 1);
  CHECK(cfg.network.layers[0].hp.mu == 0.5);
  CHECK(cfg.network.layers[0].learn.lr_a == 0.01);
  CHECK(cfg.network.layers[0].learn.lr_c == 0.01);
  CHECK(cfg.bench.data.count == 3);
  CHECK(cfg.bench.baseline.step == 0.02);
}

TEST_CASE("configuration errors") {
  CHECK(kind_of([] { from_text("bogus = 1\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { from_text("[nowhere]\nx = 1\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config_text("[layer1]\nmu = 1\nmu = 2\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config_text("justtext\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config_text("[layer1\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { from_text("[layer1]\nmu = abc\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { from_text("[layer2]\nmu = 1\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { from_text("grayscale = maybe\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { from_text("state_solver = newton\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { load_config("/nonexistent/x.cfg"); }) == ErrorKind::IoError);
}

TEST_CASE("format and parse round trip") {
  ExperimentConfig cfg = default_config();
  cfg.seed = 9;
  cfg.network.layers[0].hp.mu = 0.123456789;
  cfg.bench.patches_dir = "patches";
  const std::string text = format_config(cfg);
  const ExperimentConfig back = from_text(text);
  CHECK(format_config(back) == text);
  CHECK(back.network.layers[0].hp == cfg.network.layers[0].hp);
  CHECK(back.seed == 9);
  CHECK(back.bench.patches_dir == "patches");
}

TEST_CASE("grid strings") {
  CHECK(parse_grid("2x3") == std::pair<std::size_t, std::size_t>{2, 3});
  CHECK(kind_of([] { parse_grid("23"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_grid("0x3"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_grid("ax3"); }) == ErrorKind::ConfigError);
}
