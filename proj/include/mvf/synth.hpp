#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvf/geometry.hpp"
#include "mvf/image.hpp"
#include "mvf/parallel.hpp"

namespace mvf {

enum class ShapeKind { Plane, Sphere, Box };

const char* shape_name(ShapeKind kind);
ShapeKind shape_from_name(const std::string& name);

// Exact signed distance in the primitive's local frame.
//   plane:  params = {nx, ny, nz, d}, sdf = n·p − d (n normalized)
//   sphere: params = {r}
//   box:    params = {hx, hy, hz} (half extents)
double analytic_sdf(ShapeKind shape, const std::vector<double>& params,
                    const Vec3& p);

struct Waypoint {
  double t = 0.0;
  Pose pose;
};

// Piecewise interpolation: lerp on translation, slerp on rotation,
// clamped outside the waypoint range.
struct TrajectorySpec {
  std::vector<Waypoint> waypoints;

  Pose pose_at(double t) const;
};

struct ScenePrimitive {
  ShapeKind shape = ShapeKind::Sphere;
  std::vector<double> params;
  TrajectorySpec trajectory;  // world_from_local over time
  bool is_object = false;
  std::string label;
};

struct SceneScript {
  std::vector<ScenePrimitive> primitives;
  TrajectorySpec camera;  // world_from_cam over time
  Intrinsics intrinsics;
  int frame_count = 0;
  double frame_rate = 30.0;
  int mask_interval = 30;     // emit masks every N frames (1 = every frame)
  double depth_noise = 0.0;   // Gaussian sigma = depth_noise · z², 0 = off
  uint64_t noise_seed = 0;

  double duration() const { return frame_count / frame_rate; }
  double timestamp(int frame) const { return frame / frame_rate; }
};

struct SynthFrame {
  Frame frame;   // exact depth; no color
  MaskSet masks; // object primitives only; meta lists visible instances
  Pose world_from_cam;
  // world_from_local per object primitive, keyed by mask instance id
  std::vector<std::pair<uint16_t, Pose>> object_poses;
};

// Sphere-traced exact render at time t. Masks are always filled; the
// detection cadence is applied by materialize_scene. No noise.
SynthFrame render_frame(const SceneScript& script, double t,
                        ThreadPool* pool = nullptr);

SceneScript load_scene(const std::filesystem::path& file);
void save_scene(const SceneScript& script, const std::filesystem::path& file);

// Writes the dataset layout consumed by TumSequence: depth.txt + depth/,
// masks/ on the mask cadence, calibration.txt, groundtruth.txt (camera),
// gt_object_<id>.txt (object pose in the camera frame), scene.json.
void materialize_scene(const SceneScript& script,
                       const std::filesystem::path& out_dir,
                       ThreadPool* pool = nullptr);

}  // namespace mvf
