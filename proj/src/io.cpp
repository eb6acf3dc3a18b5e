#include "mmdpcn/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "mmdpcn/errors.hpp"

#ifndef MMDPCN_VERSION
#define MMDPCN_VERSION "v0.1.0"
#endif

namespace mmdpcn {

namespace fs = std::filesystem;

namespace {

constexpr char kRtenMagic[4] = {'R', 'T', 'E', 'N'};

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorKind::IoError, "read failed: " + path.string());
  return bytes;
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::IoError, "cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(out.good(), ErrorKind::IoError, "write failed: " + path.string());
}

// Header tokens of a PNM file, skipping whitespace and comments.
class PnmHeader {
 public:
  explicit PnmHeader(const std::vector<unsigned char>& b) : b_(b) {}

  std::string token() {
    skip();
    std::string out;
    while (pos_ < b_.size() && !std::isspace(b_[pos_])) out.push_back(static_cast<char>(b_[pos_++]));
    require(!out.empty(), ErrorKind::FormatError, "pnm: truncated header");
    return out;
  }

  std::size_t number() {
    const std::string t = token();
    require(std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }) && t.size() < 10,
            ErrorKind::FormatError, "pnm: bad header number '" + t + "'");
    return std::stoul(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    require(pos_ < b_.size() && std::isspace(b_[pos_]), ErrorKind::FormatError, "pnm: missing raster separator");
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

bool has_frame_extension(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".rten";
}

}  // namespace

Frame read_pnm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  PnmHeader header(bytes);
  const std::string magic = header.token();
  require(magic == "P5" || magic == "P6", ErrorKind::FormatError, "pnm: unsupported magic '" + magic + "'");
  Frame f;
  f.channels = magic == "P5" ? 1 : 3;
  f.width = header.number();
  f.height = header.number();
  const std::size_t maxval = header.number();
  require(f.width > 0 && f.height > 0, ErrorKind::FormatError, "pnm: zero-sized image");
  require(maxval >= 1 && maxval <= 65535, ErrorKind::FormatError, "pnm: maxval out of range");
  const std::size_t start = header.raster_start();
  const std::size_t width_bytes = maxval > 255 ? 2 : 1;
  const std::size_t count = f.width * f.height * f.channels;
  require(bytes.size() - start == count * width_bytes, ErrorKind::FormatError,
          "pnm: raster size does not match header in " + path.string());
  f.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t v = width_bytes == 1 ? bytes[start + i]
                                           : (static_cast<std::size_t>(bytes[start + 2 * i]) << 8) | bytes[start + 2 * i + 1];
    f.pixels[i] = static_cast<double>(std::min(v, maxval)) / static_cast<double>(maxval);
  }
  return f;
}

void write_pnm(const Frame& frame, const fs::path& path) {
  require(frame.channels == 1 || frame.channels == 3, ErrorKind::ShapeError, "pnm: frames must have 1 or 3 channels");
  require(frame.pixels.size() == frame.height * frame.width * frame.channels, ErrorKind::ShapeError,
          "pnm: pixel count does not match frame shape");
  std::string out = (frame.channels == 1 ? "P5\n" : "P6\n") + std::to_string(frame.width) + " " +
                    std::to_string(frame.height) + "\n255\n";
  for (double v : frame.pixels) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  write_bytes(path, out);
}

std::vector<Frame> read_rten(const fs::path& path) {
  const auto b = read_bytes(path);
  require(b.size() >= 8 && std::equal(kRtenMagic, kRtenMagic + 4, b.begin()), ErrorKind::FormatError,
          "rten: bad magic in " + path.string());
  const std::uint32_t rank = get_u32(b, 4);
  require(rank >= 2 && rank <= 4, ErrorKind::FormatError, "rten: rank must be 2, 3 or 4");
  require(b.size() >= 8 + 4 * rank, ErrorKind::FormatError, "rten: truncated header");
  std::vector<std::size_t> dims(rank);
  for (std::uint32_t i = 0; i < rank; ++i) dims[i] = get_u32(b, 8 + 4 * i);
  std::size_t t = 1, h, w, c = 1;
  if (rank == 4) {
    t = dims[0];
    h = dims[1];
    w = dims[2];
    c = dims[3];
  } else {
    h = dims[0];
    w = dims[1];
    if (rank == 3) c = dims[2];
  }
  require(h > 0 && w > 0 && c > 0, ErrorKind::FormatError, "rten: zero-sized frame");
  const std::size_t per_frame = h * w * c;
  const std::size_t data_start = 8 + 4 * rank;
  require(b.size() - data_start == 4 * per_frame * t, ErrorKind::FormatError,
          "rten: data size does not match dims in " + path.string());
  std::vector<Frame> frames;
  frames.reserve(t);
  std::size_t at = data_start;
  for (std::size_t f = 0; f < t; ++f) {
    Frame fr{h, w, c, std::vector<double>(per_frame)};
    for (double& v : fr.pixels) {
      v = static_cast<double>(std::bit_cast<float>(get_u32(b, at)));
      at += 4;
    }
    frames.push_back(std::move(fr));
  }
  return frames;
}

void write_rten(const std::vector<Frame>& frames, const fs::path& path) {
  require(!frames.empty(), ErrorKind::EmptyVector, "rten: no frames to write");
  const Frame& first = frames.front();
  std::string out(kRtenMagic, 4);
  put_u32(out, 4);
  put_u32(out, static_cast<std::uint32_t>(frames.size()));
  put_u32(out, static_cast<std::uint32_t>(first.height));
  put_u32(out, static_cast<std::uint32_t>(first.width));
  put_u32(out, static_cast<std::uint32_t>(first.channels));
  for (const Frame& f : frames) {
    require(f.height == first.height && f.width == first.width && f.channels == first.channels &&
                f.pixels.size() == f.height * f.width * f.channels,
            ErrorKind::ShapeError, "rten: frames differ in shape");
    for (double v : f.pixels) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  write_bytes(path, out);
}

std::vector<Frame> load_frames_dir(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorKind::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && has_frame_extension(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  std::vector<Frame> frames;
  for (const auto& f : files) {
    if (f.extension() == ".rten") {
      auto more = read_rten(f);
      frames.insert(frames.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    } else {
      frames.push_back(read_pnm(f));
    }
  }
  return frames;
}

void save_frames_dir(const std::vector<Frame>& frames, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::IoError, "cannot create directory " + dir.string());
  char name[32];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%05zu.%s", i, frames[i].channels == 3 ? "ppm" : "pgm");
    write_pnm(frames[i], dir / name);
  }
}

std::vector<int> read_labels_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::FormatError, "labels: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "frame_index,label", ErrorKind::FormatError, "labels: expected header frame_index,label");
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorKind::FormatError, "labels: malformed row '" + line + "'");
    std::size_t used_i = 0, used_l = 0;
    long index = -1;
    int label = 0;
    try {
      index = std::stol(line.substr(0, comma), &used_i);
      label = std::stoi(line.substr(comma + 1), &used_l);
    } catch (const std::exception&) {
      fail(ErrorKind::FormatError, "labels: malformed row '" + line + "'");
    }
    require(used_i == comma && used_l == line.size() - comma - 1, ErrorKind::FormatError,
            "labels: malformed row '" + line + "'");
    require(index == static_cast<long>(labels.size()), ErrorKind::FormatError,
            "labels: frame indices must run 0..n-1 in order");
    labels.push_back(label);
  }
  return labels;
}

void write_labels_csv(const std::vector<int>& labels, const fs::path& path) {
  std::string out = "frame_index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  write_text(path, out);
}

void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text); }

std::string read_text(const fs::path& path) {
  const auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["output_dir"] = output_dir;
  j["version"] = version;
  j["started"] = started;
  j["finished"] = finished;
  return j.dump(2) + "\n";
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string version_string() { return MMDPCN_VERSION; }

void write_manifest(const RunManifest& manifest, const fs::path& dir) {
  write_text(dir / "manifest.json", manifest.to_json());
}

}  // namespace mmdpcn
