#pragma once

#include <filesystem>
#include <string>

#include "mvf/association.hpp"
#include "mvf/geometry.hpp"
#include "mvf/objects.hpp"
#include "mvf/tracking.hpp"

namespace mvf {

struct BilateralConfig {
  double spatial_sigma = 4.5;
  double range_sigma = 0.03;
  int radius = 7;
};

struct BackgroundConfig {
  int resolution = 512;
  double size = 5.12;  // meters, cubic
  double weight_cap = 64.0;
};

struct PipelineConfig {
  int threads = 1;
  bool deterministic = false;
  std::string kernel_backend = "auto";  // auto | scalar | avx2
  int detection_interval = 30;

  // fx == 0 -> use the dataset calibration
  double camera_fx = 0, camera_fy = 0, camera_cx = 0, camera_cy = 0;

  BilateralConfig bilateral;
  BackgroundConfig background;
  LikelihoodParams likelihood;
  TrackingConfig tracking;
  CreationConfig creation;

  double match_iou = 0.2;
  double delete_below = 0.1;
  int visibility_min_pixels = 1600;
  int visibility_border = 20;
};

// Key-value text format: "key = value", '#' starts a comment, unknown keys
// are errors (with line numbers). serialize/parse round-trip exactly.
std::string serialize_config(const PipelineConfig& cfg);
PipelineConfig parse_config(const std::string& text,
                            const std::string& origin = "<config>");
PipelineConfig load_config(const std::filesystem::path& file);

}  // namespace mvf
