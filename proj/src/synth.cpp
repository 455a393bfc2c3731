#include "mvf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <random>

#include "mvf/errors.hpp"
#include "mvf/io_tum.hpp"
#include "mvf/png_io.hpp"
#include "mvf/trajectory.hpp"

namespace mvf {
namespace {

constexpr double kHitEps = 1e-6;
constexpr int kMaxSteps = 512;
constexpr double kNear = 0.05;
constexpr double kFar = 20.0;

std::string stamp_string(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

}  // namespace

const char* shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Plane: return "plane";
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Box: return "box";
  }
  return "?";
}

ShapeKind shape_from_name(const std::string& name) {
  if (name == "plane") return ShapeKind::Plane;
  if (name == "sphere") return ShapeKind::Sphere;
  if (name == "box") return ShapeKind::Box;
  throw std::invalid_argument("unknown shape: " + name);
}

double analytic_sdf(ShapeKind shape, const std::vector<double>& params,
                    const Vec3& p) {
  switch (shape) {
    case ShapeKind::Plane: {
      if (params.size() != 4) throw std::invalid_argument("plane wants nx ny nz d");
      Vec3 n(params[0], params[1], params[2]);
      const double len = n.norm();
      if (len <= 0) throw std::invalid_argument("plane normal is zero");
      return n.dot(p) / len - params[3];
    }
    case ShapeKind::Sphere: {
      if (params.size() != 1) throw std::invalid_argument("sphere wants r");
      return p.norm() - params[0];
    }
    case ShapeKind::Box: {
      if (params.size() != 3) throw std::invalid_argument("box wants hx hy hz");
      const Vec3 q = p.cwiseAbs() - Vec3(params[0], params[1], params[2]);
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
  }
  throw std::invalid_argument("unknown shape");
}

Pose TrajectorySpec::pose_at(double t) const {
  if (waypoints.empty()) {
    throw std::invalid_argument("trajectory has no waypoints");
  }
  if (t <= waypoints.front().t) return waypoints.front().pose;
  if (t >= waypoints.back().t) return waypoints.back().pose;
  size_t hi = 1;
  while (waypoints[hi].t < t) ++hi;
  const Waypoint& a = waypoints[hi - 1];
  const Waypoint& b = waypoints[hi];
  const double span = b.t - a.t;
  const double s = span > 0 ? (t - a.t) / span : 0.0;
  const Vec3 trans = (1.0 - s) * a.pose.translation() + s * b.pose.translation();
  const Eigen::Quaterniond q =
      a.pose.quaternion().slerp(s, b.pose.quaternion());
  return Pose(q.toRotationMatrix(), trans);
}

SynthFrame render_frame(const SceneScript& script, double t,
                        ThreadPool* pool) {
  const Intrinsics& k = script.intrinsics;
  if (!k.valid()) throw std::invalid_argument("scene intrinsics invalid");

  SynthFrame out;
  out.frame.timestamp = t;
  out.frame.depth = Image<float>(k.width, k.height);
  out.frame.depth.fill(0.0f);
  out.masks.instance_map = Image<uint16_t>(k.width, k.height);
  out.masks.instance_map.fill(0);
  out.world_from_cam = script.camera.pose_at(t);

  struct Prepared {
    ShapeKind shape;
    Mat3 rot;  // local_from_world
    Vec3 trans;
    Vec3 abc = Vec3::Zero();
    double d = 0;
    uint16_t id = 0;
  };
  const size_t n = script.primitives.size();
  std::vector<Prepared> prims(n);
  uint16_t next_id = 1;
  for (size_t i = 0; i < n; ++i) {
    const ScenePrimitive& sp = script.primitives[i];
    analytic_sdf(sp.shape, sp.params, Vec3::Zero());  // validate params
    const Pose world_from_local = sp.trajectory.pose_at(t);
    const Pose inv = world_from_local.inverse();
    Prepared& pr = prims[i];
    pr.shape = sp.shape;
    pr.rot = inv.rotation();
    pr.trans = inv.translation();
    switch (sp.shape) {
      case ShapeKind::Plane: {
        Vec3 nrm(sp.params[0], sp.params[1], sp.params[2]);
        pr.abc = nrm / nrm.norm();
        pr.d = sp.params[3];
        break;
      }
      case ShapeKind::Sphere:
        pr.d = sp.params[0];
        break;
      case ShapeKind::Box:
        pr.abc = Vec3(sp.params[0], sp.params[1], sp.params[2]);
        break;
    }
    if (sp.is_object) {
      pr.id = next_id++;
      out.object_poses.push_back({pr.id, world_from_local});
    }
  }
  if (n == 0) return out;

  auto prim_sdf = [](const Prepared& pr, const Vec3& world_p) -> double {
    const Vec3 p = pr.rot * world_p + pr.trans;
    switch (pr.shape) {
      case ShapeKind::Plane:
        return pr.abc.dot(p) - pr.d;
      case ShapeKind::Sphere:
        return p.norm() - pr.d;
      case ShapeKind::Box: {
        const Vec3 q = p.cwiseAbs() - pr.abc;
        return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
      }
    }
    return 0;
  };

  const Mat3 r_wc = out.world_from_cam.rotation();
  const Vec3 origin = out.world_from_cam.translation();

  auto trace_rows = [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      float* drow = out.frame.depth.row(y);
      uint16_t* mrow = out.masks.instance_map.row(y);
      for (int x = 0; x < k.width; ++x) {
        const Vec3 dir_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
        const Vec3 dir = r_wc * dir_cam;
        const double len = dir.norm();
        double z = kNear;
        int hit = -1;
        for (int step = 0; step < kMaxSteps; ++step) {
          const Vec3 p = origin + z * dir;
          double best = std::numeric_limits<double>::infinity();
          int best_i = -1;
          for (size_t i = 0; i < n; ++i) {
            const double s = prim_sdf(prims[i], p);
            if (s < best) {
              best = s;
              best_i = static_cast<int>(i);
            }
          }
          if (best < kHitEps) {
            hit = best_i;
            break;
          }
          z += best / len;
          if (z > kFar) break;
        }
        if (hit >= 0) {
          drow[x] = static_cast<float>(z);
          mrow[x] = prims[hit].id;
        }
      }
    }
  };
  for_chunks(pool, 0, k.height, 16, trace_rows);

  // meta lists only instances actually visible in the map
  std::vector<char> seen(next_id, 0);
  for (size_t p = 0; p < out.masks.instance_map.size(); ++p) {
    seen[out.masks.instance_map.data()[p]] = 1;
  }
  for (size_t i = 0; i < n; ++i) {
    if (prims[i].id != 0 && seen[prims[i].id]) {
      out.masks.meta.push_back({prims[i].id, script.primitives[i].label, 1.0});
    }
  }
  return out;
}

namespace {

nlohmann::json waypoints_to_json(const TrajectorySpec& traj) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Waypoint& w : traj.waypoints) {
    const Eigen::AngleAxisd aa(w.pose.rotation());
    const Vec3 rv = aa.angle() * aa.axis();
    arr.push_back({{"t", w.t},
                   {"position", {w.pose.translation().x(),
                                 w.pose.translation().y(),
                                 w.pose.translation().z()}},
                   {"axis_angle", {rv.x(), rv.y(), rv.z()}}});
  }
  return arr;
}

TrajectorySpec waypoints_from_json(const nlohmann::json& arr) {
  TrajectorySpec traj;
  for (const auto& jw : arr) {
    Waypoint w;
    w.t = jw.at("t").get<double>();
    const auto& pos = jw.at("position");
    const Vec3 trans(pos.at(0).get<double>(), pos.at(1).get<double>(),
                     pos.at(2).get<double>());
    Vec3 rv = Vec3::Zero();
    if (jw.contains("axis_angle")) {
      const auto& a = jw.at("axis_angle");
      rv = Vec3(a.at(0).get<double>(), a.at(1).get<double>(),
                a.at(2).get<double>());
    }
    Mat3 rot = Mat3::Identity();
    const double angle = rv.norm();
    if (angle > 0) {
      rot = Eigen::AngleAxisd(angle, rv / angle).toRotationMatrix();
    }
    w.pose = Pose(rot, trans);
    traj.waypoints.push_back(w);
  }
  if (traj.waypoints.empty()) {
    throw IoError("trajectory needs at least one waypoint");
  }
  for (size_t i = 1; i < traj.waypoints.size(); ++i) {
    if (traj.waypoints[i].t < traj.waypoints[i - 1].t) {
      throw IoError("trajectory waypoints out of order");
    }
  }
  return traj;
}

}  // namespace

SceneScript load_scene(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open scene file: " + file.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
  SceneScript s;
  try {
    const auto& ji = j.at("intrinsics");
    s.intrinsics.fx = ji.at("fx").get<double>();
    s.intrinsics.fy = ji.at("fy").get<double>();
    s.intrinsics.cx = ji.at("cx").get<double>();
    s.intrinsics.cy = ji.at("cy").get<double>();
    s.intrinsics.width = ji.at("width").get<int>();
    s.intrinsics.height = ji.at("height").get<int>();
    s.frame_count = j.at("frame_count").get<int>();
    s.frame_rate = j.value("frame_rate", 30.0);
    s.mask_interval = j.value("mask_interval", 30);
    s.depth_noise = j.value("depth_noise", 0.0);
    s.noise_seed = j.value("noise_seed", uint64_t{0});
    s.camera = waypoints_from_json(j.at("camera"));
    for (const auto& jp : j.at("primitives")) {
      ScenePrimitive p;
      p.shape = shape_from_name(jp.at("shape").get<std::string>());
      p.params = jp.at("params").get<std::vector<double>>();
      p.trajectory = waypoints_from_json(jp.at("trajectory"));
      p.is_object = jp.value("is_object", false);
      p.label = jp.value("label", std::string(shape_name(p.shape)));
      // validate params eagerly
      analytic_sdf(p.shape, p.params, Vec3::Zero());
      s.primitives.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
  if (s.frame_count <= 0) throw IoError("frame_count must be positive");
  if (s.frame_rate <= 0) throw IoError("frame_rate must be positive");
  if (s.mask_interval <= 0) throw IoError("mask_interval must be positive");
  return s;
}

void save_scene(const SceneScript& s, const std::filesystem::path& file) {
  nlohmann::json j;
  j["intrinsics"] = {{"fx", s.intrinsics.fx}, {"fy", s.intrinsics.fy},
                     {"cx", s.intrinsics.cx}, {"cy", s.intrinsics.cy},
                     {"width", s.intrinsics.width},
                     {"height", s.intrinsics.height}};
  j["frame_count"] = s.frame_count;
  j["frame_rate"] = s.frame_rate;
  j["mask_interval"] = s.mask_interval;
  j["depth_noise"] = s.depth_noise;
  j["noise_seed"] = s.noise_seed;
  j["camera"] = waypoints_to_json(s.camera);
  j["primitives"] = nlohmann::json::array();
  for (const ScenePrimitive& p : s.primitives) {
    j["primitives"].push_back({{"shape", shape_name(p.shape)},
                               {"params", p.params},
                               {"trajectory", waypoints_to_json(p.trajectory)},
                               {"is_object", p.is_object},
                               {"label", p.label}});
  }
  std::ofstream os(file);
  if (!os) throw IoError("cannot write scene file: " + file.string());
  os << j.dump(2) << "\n";
}

void materialize_scene(const SceneScript& script,
                       const std::filesystem::path& out_dir,
                       ThreadPool* pool) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "depth");
  fs::create_directories(out_dir / "masks");

  std::ofstream depth_index(out_dir / "depth.txt");
  if (!depth_index) throw IoError("cannot write depth.txt");
  depth_index << "# depth maps\n# timestamp filename\n";

  {
    std::ofstream cal(out_dir / "calibration.txt");
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f\n",
                  script.intrinsics.fx, script.intrinsics.fy,
                  script.intrinsics.cx, script.intrinsics.cy);
    cal << buf;
  }

  Trajectory cam_traj;
  std::map<uint16_t, Trajectory> object_trajs;

  for (int f = 0; f < script.frame_count; ++f) {
    const double t = script.timestamp(f);
    SynthFrame sf = render_frame(script, t, pool);

    if (script.depth_noise > 0) {
      std::mt19937_64 rng(script.noise_seed ^
                          (0x9E3779B97F4A7C15ull * (f + 1)));
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (size_t p = 0; p < sf.frame.depth.size(); ++p) {
        float& d = sf.frame.depth.data()[p];
        if (d > 0) {
          const double sigma = script.depth_noise * double(d) * double(d);
          d = static_cast<float>(std::max(0.0, d + sigma * gauss(rng)));
        }
      }
    }

    const std::string stamp = stamp_string(t);
    Image<uint16_t> quant(sf.frame.depth.width(), sf.frame.depth.height());
    for (size_t p = 0; p < quant.size(); ++p) {
      const double v =
          std::lround(sf.frame.depth.data()[p] * script.intrinsics.depth_scale);
      quant.data()[p] = static_cast<uint16_t>(std::clamp(v, 0.0, 65535.0));
    }
    write_png16(out_dir / "depth" / (stamp + ".png"), quant);
    depth_index << stamp << " depth/" << stamp << ".png\n";

    if (f % script.mask_interval == 0) {
      write_mask_set(sf.masks, out_dir / "masks" / (stamp + ".png"),
                     out_dir / "masks" / (stamp + ".json"));
    }

    cam_traj.append(t, sf.world_from_cam);
    const Pose cam_from_world = sf.world_from_cam.inverse();
    for (const auto& [id, world_from_obj] : sf.object_poses) {
      object_trajs[id].append(t, cam_from_world * world_from_obj);
    }
  }

  write_trajectory(cam_traj, out_dir / "groundtruth.txt",
                   "camera trajectory (world_from_cam)");
  for (const auto& [id, traj] : object_trajs) {
    write_trajectory(traj,
                     out_dir / ("gt_object_" + std::to_string(id) + ".txt"),
                     "object pose in camera frame");
  }
  save_scene(script, out_dir / "scene.json");
}

}  // namespace mvf
