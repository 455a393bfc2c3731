#pragma once

#include <vector>

#include "mvf/geometry.hpp"
#include "mvf/image.hpp"
#include "mvf/tsdf.hpp"

namespace mvf {

class ThreadPool;

struct RenderModel {
  int id = 0;
  const TsdfVolume* volume = nullptr;
  Pose vol_from_cam;
  // Objects gate hits on foreground probability > 0.5; the background must not.
  bool fg_gated = true;
};

struct RaycastOptions {
  double step_scale = 0.8;  // coarse step = step_scale * truncation
  double near = 0.05;
  double far = 10.0;
  bool normals = false;
};

struct RenderResult {
  Image<int32_t> model_id;  // -1 where nothing hits
  Image<float> depth;
  Image<Rgb8> shaded;  // filled only when options.normals
};

// Per-pixel, per-model TSDF ray march: coarse steps while |psi| > voxel_size,
// voxel steps near the surface, sign-change detection with secant refinement;
// the nearest surviving hit across models wins.
RenderResult raycast(const std::vector<RenderModel>& models, const Intrinsics& k,
                     const RaycastOptions& opts, ThreadPool* pool = nullptr);

Image<uint8_t> model_mask(const RenderResult& render, int model_id);

}  // namespace mvf
