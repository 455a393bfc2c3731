#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mvf/synth.hpp"

using namespace mvf;
namespace fs = std::filesystem;

namespace {

const Intrinsics kSynK{100, 100, 31.5, 23.5, 64, 48};

TrajectorySpec static_at(const Pose& pose) {
  return TrajectorySpec{{{0.0, pose}}};
}

SceneScript base_scene() {
  SceneScript s;
  s.intrinsics = kSynK;
  s.frame_count = 2;
  s.camera = static_at(Pose::identity());
  return s;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("analytic distances") {
  // plane z = 0.5 with normal +z: below is negative side
  CHECK(analytic_sdf(ShapeKind::Plane, {0, 0, 1, 0.5}, Vec3(3, -2, 0.5)) ==
        doctest::Approx(0.0));
  CHECK(analytic_sdf(ShapeKind::Plane, {0, 0, 1, 0.5}, Vec3(0, 0, 2.0)) ==
        doctest::Approx(1.5));
  // unnormalized normal gets normalized
  CHECK(analytic_sdf(ShapeKind::Plane, {0, 0, 2, 0.5}, Vec3(0, 0, 2.0)) ==
        doctest::Approx(1.5));

  CHECK(analytic_sdf(ShapeKind::Sphere, {0.3}, Vec3(0, 0.5, 0)) ==
        doctest::Approx(0.2));
  CHECK(analytic_sdf(ShapeKind::Sphere, {0.3}, Vec3(0.1, 0, 0)) ==
        doctest::Approx(-0.2));

  // unit-half-extent box: outside corner distance is euclidean
  CHECK(analytic_sdf(ShapeKind::Box, {1, 1, 1}, Vec3(2, 2, 0)) ==
        doctest::Approx(std::sqrt(2.0)));
  CHECK(analytic_sdf(ShapeKind::Box, {1, 1, 1}, Vec3(0.5, 0, 0)) ==
        doctest::Approx(-0.5));
  CHECK(analytic_sdf(ShapeKind::Box, {1, 1, 1}, Vec3(1.5, 0, 0)) ==
        doctest::Approx(0.5));

  CHECK_THROWS_AS(analytic_sdf(ShapeKind::Sphere, {1, 2}, Vec3::Zero()),
                  std::invalid_argument);
}

TEST_CASE("shape names round trip") {
  for (ShapeKind k : {ShapeKind::Plane, ShapeKind::Sphere, ShapeKind::Box}) {
    CHECK(shape_from_name(shape_name(k)) == k);
  }
  CHECK_THROWS_AS(shape_from_name("cone"), std::invalid_argument);
}

TEST_CASE("trajectory interpolation and clamping") {
  TrajectorySpec spec;
  spec.waypoints.push_back({0.0, Pose::identity()});
  spec.waypoints.push_back(
      {2.0, Pose(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix(),
                 Vec3(1, 0, 0))});
  const Pose mid = spec.pose_at(1.0);
  CHECK((mid.translation() - Vec3(0.5, 0, 0)).norm() < 1e-12);
  CHECK(Eigen::AngleAxisd(mid.rotation()).angle() == doctest::Approx(M_PI / 4));
  // clamped outside the range
  CHECK((spec.pose_at(-5.0).translation()).norm() < 1e-12);
  CHECK((spec.pose_at(9.0).translation() - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("camera two meters from a unit sphere sees depth one") {
  SceneScript s = base_scene();
  ScenePrimitive sphere;
  sphere.shape = ShapeKind::Sphere;
  sphere.params = {1.0};
  sphere.trajectory = static_at(Pose(Mat3::Identity(), Vec3(0, 0, 2)));
  sphere.is_object = true;
  sphere.label = "ball";
  s.primitives.push_back(sphere);

  const SynthFrame f = render_frame(s, 0.0);
  const int cx = 32, cy = 24;
  CHECK(std::abs(f.frame.depth.at(cx, cy) - 1.0f) < 1e-3);
  // exact at the true center ray: use the closed form for pixel (31.5+eps..)
  const double dx = (cx - kSynK.cx) / kSynK.fx;
  const double dy = (cy - kSynK.cy) / kSynK.fy;
  // |z*(dx,dy,1) - (0,0,2)| = 1
  const double a = dx * dx + dy * dy + 1;
  const double want = (2 - std::sqrt(4 - 3 * a)) / a;
  CHECK(std::abs(f.frame.depth.at(cx, cy) - want) < 1e-5);
  CHECK(f.masks.instance_map.at(cx, cy) == 1);
  REQUIRE(f.masks.meta.size() == 1);
  CHECK(f.masks.meta[0].id == 1);
  CHECK(f.masks.meta[0].label == "ball");
  REQUIRE(f.object_poses.size() == 1);
  CHECK(f.object_poses[0].first == 1);
  CHECK((f.object_poses[0].second.translation() - Vec3(0, 0, 2)).norm() <
        1e-12);
}

TEST_CASE("empty scene renders no depth") {
  const SynthFrame f = render_frame(base_scene(), 0.0);
  for (int y = 0; y < f.frame.depth.height(); ++y) {
    for (int x = 0; x < f.frame.depth.width(); ++x) {
      CHECK(f.frame.depth.at(x, y) == 0.f);
      CHECK(f.masks.instance_map.at(x, y) == 0);
    }
  }
  CHECK(f.masks.meta.empty());
}

TEST_CASE("hit points sit on the analytic surface") {
  SceneScript s = base_scene();
  ScenePrimitive wall;
  wall.shape = ShapeKind::Plane;
  wall.params = {0, 0, -1, -1.5};  // plane z=1.5 facing the camera
  wall.trajectory = static_at(Pose::identity());
  s.primitives.push_back(wall);
  ScenePrimitive box;
  box.shape = ShapeKind::Box;
  box.params = {0.2, 0.15, 0.1};
  box.trajectory = static_at(
      Pose(Eigen::AngleAxisd(0.4, Vec3(1, 1, 0).normalized()).toRotationMatrix(),
           Vec3(0.1, -0.05, 1.0)));
  box.is_object = true;
  box.label = "box";
  s.primitives.push_back(box);

  const SynthFrame f = render_frame(s, 0.0);
  int checked = 0;
  for (int y = 0; y < 48; y += 3) {
    for (int x = 0; x < 64; x += 3) {
      const float d = f.frame.depth.at(x, y);
      if (!(d > 0)) continue;
      const Vec3 p(d * (x - kSynK.cx) / kSynK.fx, d * (y - kSynK.cy) / kSynK.fy,
                   d);
      double best = 1e9;
      for (const ScenePrimitive& prim : s.primitives) {
        const Pose w = prim.trajectory.pose_at(0.0);
        best = std::min(best,
                        std::abs(analytic_sdf(prim.shape, prim.params,
                                              w.inverse() * p)));
      }
      CHECK(best < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("an object behind the wall never reaches the mask") {
  SceneScript s = base_scene();
  ScenePrimitive wall;
  wall.shape = ShapeKind::Plane;
  wall.params = {0, 0, -1, -1.0};  // z = 1.0
  wall.trajectory = static_at(Pose::identity());
  s.primitives.push_back(wall);
  ScenePrimitive hidden;
  hidden.shape = ShapeKind::Sphere;
  hidden.params = {0.3};
  hidden.trajectory = static_at(Pose(Mat3::Identity(), Vec3(0, 0, 2.5)));
  hidden.is_object = true;
  hidden.label = "ghost";
  s.primitives.push_back(hidden);

  const SynthFrame f = render_frame(s, 0.0);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      CHECK(f.masks.instance_map.at(x, y) == 0);
      CHECK(std::abs(f.frame.depth.at(x, y) - 1.0f) < 1e-4);
    }
  }
  // invisible instances stay out of the metadata
  CHECK(f.masks.meta.empty());
  // but the pose stream still carries them
  REQUIRE(f.object_poses.size() == 1);
}

TEST_CASE("moving primitives follow their trajectory") {
  SceneScript s = base_scene();
  s.frame_count = 4;
  ScenePrimitive ball;
  ball.shape = ShapeKind::Sphere;
  ball.params = {0.4};
  TrajectorySpec tr;
  tr.waypoints.push_back({0.0, Pose(Mat3::Identity(), Vec3(0, 0, 2))});
  tr.waypoints.push_back({1.0, Pose(Mat3::Identity(), Vec3(0, 0, 3))});
  ball.trajectory = tr;
  ball.is_object = true;
  ball.label = "ball";
  s.primitives.push_back(ball);

  const SynthFrame f0 = render_frame(s, 0.0);
  const SynthFrame f1 = render_frame(s, 0.5);
  CHECK(std::abs(f0.frame.depth.at(32, 24) - 1.6f) < 1e-3);
  CHECK(std::abs(f1.frame.depth.at(32, 24) - 2.1f) < 1e-3);
}

TEST_CASE("scene json round trip") {
  SceneScript s = base_scene();
  s.frame_count = 17;
  s.frame_rate = 25.0;
  s.mask_interval = 5;
  s.depth_noise = 0.002;
  s.noise_seed = 99;
  s.camera = TrajectorySpec{{
      {0.0, Pose::identity()},
      {1.0, Pose(Eigen::AngleAxisd(0.2, Vec3::UnitY()).toRotationMatrix(),
                 Vec3(0.1, 0, 0.05))},
  }};
  ScenePrimitive p;
  p.shape = ShapeKind::Box;
  p.params = {0.1, 0.2, 0.3};
  p.trajectory = static_at(Pose(Mat3::Identity(), Vec3(1, 2, 3)));
  p.is_object = true;
  p.label = "crate";
  s.primitives.push_back(p);

  const fs::path file = fs::temp_directory_path() / "mvf_scene_rt.json";
  save_scene(s, file);
  const SceneScript back = load_scene(file);
  fs::remove(file);

  CHECK(back.frame_count == 17);
  CHECK(back.frame_rate == doctest::Approx(25.0));
  CHECK(back.mask_interval == 5);
  CHECK(back.depth_noise == doctest::Approx(0.002));
  CHECK(back.noise_seed == 99);
  CHECK(back.intrinsics.fx == doctest::Approx(s.intrinsics.fx));
  CHECK(back.intrinsics.width == s.intrinsics.width);
  REQUIRE(back.primitives.size() == 1);
  CHECK(back.primitives[0].shape == ShapeKind::Box);
  CHECK(back.primitives[0].label == "crate");
  CHECK(back.primitives[0].is_object);
  REQUIRE(back.primitives[0].params.size() == 3);
  CHECK(back.primitives[0].params[2] == doctest::Approx(0.3));
  REQUIRE(back.camera.waypoints.size() == 2);
  const Pose want = s.camera.pose_at(0.7);
  const Pose got = back.camera.pose_at(0.7);
  CHECK((want.translation() - got.translation()).norm() < 1e-9);
  CHECK((want.rotation() - got.rotation()).norm() < 1e-9);
}

TEST_CASE("materialized datasets follow the index layout") {
  SceneScript s = base_scene();
  s.frame_count = 3;
  s.mask_interval = 2;
  ScenePrimitive ball;
  ball.shape = ShapeKind::Sphere;
  ball.params = {0.5};
  ball.trajectory = static_at(Pose(Mat3::Identity(), Vec3(0, 0, 2)));
  ball.is_object = true;
  ball.label = "ball";
  s.primitives.push_back(ball);

  const fs::path dir = fs::temp_directory_path() / "mvf_synth_mat";
  fs::remove_all(dir);
  materialize_scene(s, dir);
  CHECK(fs::exists(dir / "depth.txt"));
  CHECK(fs::exists(dir / "calibration.txt"));
  CHECK(fs::exists(dir / "groundtruth.txt"));
  CHECK(fs::exists(dir / "scene.json"));
  CHECK(fs::exists(dir / "gt_object_1.txt"));
  // three depth frames, masks at frames 0 and 2
  CHECK(fs::exists(dir / "depth" / "0.000000.png"));
  CHECK(fs::exists(dir / "depth" / "0.033333.png"));
  CHECK(fs::exists(dir / "depth" / "0.066667.png"));
  CHECK(fs::exists(dir / "masks" / "0.000000.png"));
  CHECK(fs::exists(dir / "masks" / "0.000000.json"));
  CHECK_FALSE(fs::exists(dir / "masks" / "0.033333.png"));
  CHECK(fs::exists(dir / "masks" / "0.066667.png"));
  fs::remove_all(dir);
}

}  // TEST_SUITE
