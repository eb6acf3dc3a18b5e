#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "mmdpcn/errors.hpp"
#include "mmdpcn/io.hpp"

using namespace mmdpcn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mmdpcn_test_io" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Frame ramp(std::size_t h, std::size_t w, std::size_t c) {
  Frame f{h, w, c, std::vector<double>(h * w * c)};
  for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = static_cast<double>(i % 256) / 255.0;
  return f;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("pnm round trip") {
  const fs::path dir = temp_dir("pnm");
  for (std::size_t c : {1, 3}) {
    const Frame f = ramp(5, 7, c);
    const fs::path p = dir / (c == 1 ? "a.pgm" : "a.ppm");
    write_pnm(f, p);
    CHECK(read_pnm(p) == f);
  }
  // Out-of-range values are clipped.
  write_pnm(Frame{1, 2, 1, {-0.5, 1.5}}, dir / "clip.pgm");
  CHECK(read_pnm(dir / "clip.pgm").pixels == std::vector<double>{0.0, 1.0});
}

TEST_CASE("pnm with comments and 16-bit samples") {
  const fs::path p = temp_dir("pnm16") / "x.pgm";
  {
    std::ofstream os(p, std::ios::binary);
    os << "P5\n# comment\n2 1\n65535\n";
    const unsigned char px[] = {0x00, 0x00, 0xff, 0xff};
    os.write(reinterpret_cast<const char*>(px), 4);
  }
  const Frame f = read_pnm(p);
  CHECK(f.width == 2);
  CHECK(f.height == 1);
  CHECK(f.pixels == std::vector<double>{0.0, 1.0});
}

TEST_CASE("pnm errors") {
  const fs::path dir = temp_dir("pnm_bad");
  write_text(dir / "magic.pgm", "P2\n1 1\n255\n0");
  CHECK(kind_of([&] { read_pnm(dir / "magic.pgm"); }) == ErrorKind::FormatError);
  write_text(dir / "short.pgm", std::string("P5\n2 2\n255\n") + "ab");
  CHECK(kind_of([&] { read_pnm(dir / "short.pgm"); }) == ErrorKind::FormatError);
  CHECK(kind_of([&] { read_pnm(dir / "missing.pgm"); }) == ErrorKind::IoError);
  CHECK(kind_of([&] { write_pnm(Frame{1, 1, 2, {0, 0}}, dir / "two.pgm"); }) == ErrorKind::ShapeError);
}

TEST_CASE("rten round trip") {
  const fs::path dir = temp_dir("rten");
  const std::vector<Frame> frames{ramp(3, 4, 1), ramp(3, 4, 1)};
  write_rten(frames, dir / "seq.rten");
  const auto back = read_rten(dir / "seq.rten");
  REQUIRE(back.size() == 2);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < frames[t].pixels.size(); ++i)
      CHECK(back[t].pixels[i] == doctest::Approx(frames[t].pixels[i]).epsilon(1e-7));
  CHECK(kind_of([&] { write_rten({ramp(3, 4, 1), ramp(4, 3, 1)}, dir / "bad.rten"); }) == ErrorKind::ShapeError);
  CHECK(kind_of([&] { write_rten({}, dir / "none.rten"); }) == ErrorKind::EmptyVector);
  write_text(dir / "magic.rten", "NOPE0000");
  CHECK(kind_of([&] { read_rten(dir / "magic.rten"); }) == ErrorKind::FormatError);
  std::string truncated = read_text(dir / "seq.rten");
  truncated.pop_back();
  write_text(dir / "trunc.rten", truncated);
  CHECK(kind_of([&] { read_rten(dir / "trunc.rten"); }) == ErrorKind::FormatError);
}

TEST_CASE("frame directories") {
  const fs::path dir = temp_dir("frames");
  std::vector<Frame> frames;
  for (int t = 0; t < 3; ++t) frames.push_back(Frame{2, 2, 1, {t / 255.0, 0, 0, 1}});
  save_frames_dir(frames, dir);
  CHECK(fs::exists(dir / "frame_00000.pgm"));
  CHECK(load_frames_dir(dir) == frames);
  CHECK(kind_of([&] { load_frames_dir(dir / "frame_00000.pgm"); }) == ErrorKind::IoError);
}

TEST_CASE("labels csv") {
  const fs::path dir = temp_dir("labels");
  const std::vector<int> labels{0, 0, 2, 1};
  write_labels_csv(labels, dir / "l.csv");
  CHECK(read_text(dir / "l.csv") == "frame_index,label\n0,0\n1,0\n2,2\n3,1\n");
  CHECK(read_labels_csv(dir / "l.csv") == labels);
  write_text(dir / "gap.csv", "frame_index,label\n0,1\n2,1\n");
  CHECK(kind_of([&] { read_labels_csv(dir / "gap.csv"); }) == ErrorKind::FormatError);
  write_text(dir / "junk.csv", "frame_index,label\n0,x\n");
  CHECK(kind_of([&] { read_labels_csv(dir / "junk.csv"); }) == ErrorKind::FormatError);
  write_text(dir / "head.csv", "index,label\n0,1\n");
  CHECK(kind_of([&] { read_labels_csv(dir / "head.csv"); }) == ErrorKind::FormatError);
}

TEST_CASE("manifest") {
  RunManifest m;
  m.command = "train";
  m.config_path = "exp.cfg";
  m.seed = 7;
  m.inputs = {"a", "b"};
  m.output_dir = "out";
  m.version = version_string();
  m.started = utc_timestamp();
  m.finished = m.started;
  const fs::path dir = temp_dir("manifest");
  write_manifest(m, dir);
  const auto j = nlohmann::json::parse(read_text(dir / "manifest.json"));
  CHECK(j["command"] == "train");
  CHECK(j["seed"] == 7);
  CHECK(j["inputs"].size() == 2);
  CHECK(j["version"].get<std::string>().rfind("v", 0) == 0);
  CHECK(m.started.size() == 20);
  CHECK(m.started.back() == 'Z');
}
