#pragma once

// File formats: portable gray/pixmaps (P5/P6), the RTEN tensor container,
// labels and metric CSVs, and the per-run manifest.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmdpcn/synthetic.hpp"

namespace mmdpcn {

// P5 (1 channel) or P6 (3 channels), maxval up to 65535. Pixels scaled to [0, 1].
Frame read_pnm(const std::filesystem::path& path);
// Writes maxval 255; values are clipped to [0, 1] and rounded.
void write_pnm(const Frame& frame, const std::filesystem::path& path);

// "RTEN", u32 rank, u32 dims[rank], little-endian f32 data. Rank 2 is H x W,
// rank 3 is H x W x C, rank 4 is T x H x W x C (a frame sequence).
std::vector<Frame> read_rten(const std::filesystem::path& path);
void write_rten(const std::vector<Frame>& frames, const std::filesystem::path& path);

// Every .pgm/.ppm/.rten file in the directory, in lexicographic file-name order.
std::vector<Frame> load_frames_dir(const std::filesystem::path& dir);
// Writes frame_00000.pgm (or .ppm) and so on.
void save_frames_dir(const std::vector<Frame>& frames, const std::filesystem::path& dir);

// "frame_index,label" with a header row; indices must run 0..n-1 in order.
std::vector<int> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::vector<int>& labels, const std::filesystem::path& path);

// Truncates and writes; IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::string output_dir;
  std::string version;
  std::string started;   // ISO-8601 UTC
  std::string finished;  // ISO-8601 UTC

  std::string to_json() const;
};

std::string utc_timestamp();
// Version string of the build, "v<major>.<minor>.<patch>[-g<commit>]".
std::string version_string();

void write_manifest(const RunManifest& manifest, const std::filesystem::path& dir);

}  // namespace mmdpcn
