#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvf/geometry.hpp"
#include "mvf/image.hpp"
#include "mvf/trajectory.hpp"

namespace mvf {

struct IndexEntry {
  double t = 0.0;
  std::string stamp;  // timestamp exactly as written in the index
  std::string path;
};

// "timestamp path" lines, '#' comments; errors carry file and line number.
std::vector<IndexEntry> read_index_file(const std::filesystem::path& file);

// TUM RGB-D layout: depth.txt (+ optional rgb.txt, groundtruth.txt,
// calibration.txt "fx fy cx cy"). Depth PNGs are 16-bit, meters = raw / 5000.
// Instance masks are picked up from masks/<depth-timestamp>.png (16-bit ids,
// 0 = none) with a masks/<depth-timestamp>.json meta sidecar when present.
class TumSequence {
 public:
  explicit TumSequence(const std::filesystem::path& dir);

  const Intrinsics& intrinsics() const { return k_; }
  size_t size() const { return depth_.size(); }
  double timestamp(size_t i) const { return depth_[i].t; }
  Frame frame(size_t i) const;
  bool has_groundtruth() const { return !groundtruth_.empty(); }
  const Trajectory& groundtruth() const { return groundtruth_; }
  const std::filesystem::path& dir() const { return dir_; }

  static constexpr double kDepthScale = 5000.0;
  static constexpr double kAssociationWindow = 0.02;

 private:
  std::filesystem::path dir_;
  Intrinsics k_;
  std::vector<IndexEntry> depth_;
  std::vector<IndexEntry> rgb_;
  Trajectory groundtruth_;
};

MaskSet read_mask_set(const std::filesystem::path& png_path,
                      const std::filesystem::path& json_path);
void write_mask_set(const MaskSet& masks, const std::filesystem::path& png_path,
                    const std::filesystem::path& json_path);

}  // namespace mvf
