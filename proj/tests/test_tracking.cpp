#include <doctest.h>

#include <cmath>
#include <random>

#include "mvf/parallel.hpp"
#include "mvf/tracking.hpp"

using namespace mvf;

namespace {

const Intrinsics kTrackK{100, 100, 31.5, 23.5, 64, 48};

// concave corner: back wall z=1.2, side wall x=0.25, floor-ish wall y=0.2
double corner_sdf(const Vec3& p) {
  return std::min({1.2 - p.z(), 0.25 - p.x(), 0.2 - p.y()});
}

Image<float> corner_depth() {
  Image<float> d(kTrackK.width, kTrackK.height);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      const double dx = (x - kTrackK.cx) / kTrackK.fx;
      const double dy = (y - kTrackK.cy) / kTrackK.fy;
      double s = 1.2;
      if (dx > 1e-9) s = std::min(s, 0.25 / dx);
      if (dy > 1e-9) s = std::min(s, 0.2 / dy);
      d.at(x, y) = static_cast<float>(s);
    }
  }
  return d;
}

TsdfVolume corner_volume() {
  TsdfVolume vol(Vec3(0, 0, 0.8), Eigen::Vector3i(64, 64, 64), 0.025);
  const float tr = static_cast<float>(vol.truncation());
  for (int k = 0; k < 64; ++k) {
    for (int j = 0; j < 64; ++j) {
      for (int i = 0; i < 64; ++i) {
        const float v = static_cast<float>(corner_sdf(vol.voxel_center(i, j, k)));
        vol.set_voxel(i, j, k, std::clamp(v, -tr, tr), 1.0f);
      }
    }
  }
  return vol;
}

// field g.p + c: trilinear interpolation reproduces it everywhere
TsdfVolume linear_volume(const Vec3& g, double c) {
  TsdfVolume vol(Vec3(0, 0, 1), Eigen::Vector3i(16, 16, 16), 0.1);
  for (int k = 0; k < 16; ++k) {
    for (int j = 0; j < 16; ++j) {
      for (int i = 0; i < 16; ++i) {
        const Vec3 p = vol.voxel_center(i, j, k);
        vol.set_voxel(i, j, k, static_cast<float>(g.dot(p) + c), 1.0f);
      }
    }
  }
  return vol;
}

double rotation_angle(const Pose& pose) {
  return Eigen::AngleAxisd(pose.rotation()).angle();
}

}  // namespace

TEST_SUITE("tracking") {

TEST_CASE("huber rho and weight") {
  const double d = 0.1;
  CHECK(huber_rho(0.05, d) == doctest::Approx(0.00125));
  CHECK(huber_rho(-0.05, d) == doctest::Approx(0.00125));
  CHECK(huber_weight(0.05, d) == doctest::Approx(1.0));
  CHECK(huber_rho(0.3, d) == doctest::Approx(0.1 * (0.3 - 0.05)));
  CHECK(huber_weight(0.3, d) == doctest::Approx(1.0 / 3.0));
  CHECK(huber_weight(-0.3, d) == doctest::Approx(1.0 / 3.0));
  // continuous at the elbow
  CHECK(huber_rho(d - 1e-12, d) == doctest::Approx(huber_rho(d + 1e-12, d)));
}

TEST_CASE("residual jacobians match finite differences") {
  const Vec3 g(0.4, -0.3, 0.8);
  const TsdfVolume vol = linear_volume(g, -0.7);
  Image<float> depth(kTrackK.width, kTrackK.height);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      depth.at(x, y) = 0.8f + 0.4f * float(x) / 63.f;
    }
  }
  const Pose pose(
      Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix(),
      Vec3(0.05, -0.04, 0.1));
  const auto samples = tracking_residuals(vol, depth, kTrackK, pose, nullptr);
  REQUIRE(samples.size() > 500);
  const double h = 1e-3;
  int tested = 0;
  for (size_t n = 0; n < samples.size(); n += 7) {
    const ResidualSample& s = samples[n];
    const Vec3 p_cam = backproject(Vec2(s.x, s.y), depth.at(s.x, s.y), kTrackK);
    // residual is the field value at the mapped point
    CHECK(std::abs(s.r - *vol.interpolate_sdf(pose * p_cam)) < 1e-12);
    for (int a = 0; a < 6; ++a) {
      Vec6 xi = Vec6::Zero();
      xi[a] = h;
      const Pose plus = pose * se3_exp(Twist::from_vector(xi));
      xi[a] = -h;
      const Pose minus = pose * se3_exp(Twist::from_vector(xi));
      const auto fp = vol.interpolate_sdf(plus * p_cam);
      const auto fm = vol.interpolate_sdf(minus * p_cam);
      REQUIRE(fp.has_value());
      REQUIRE(fm.has_value());
      const double fd = (*fp - *fm) / (2 * h);
      CHECK(std::abs(s.jacobian[a] - fd) < 1e-3);
    }
    ++tested;
  }
  CHECK(tested > 70);
}

TEST_CASE("alignment recovers a perturbed pose") {
  const TsdfVolume vol = corner_volume();
  const Image<float> depth = corner_depth();
  Vec6 xi;
  xi << 0.01, -0.008, 0.012, 0.005, -0.004, 0.006;
  const Pose init = se3_exp(Twist::from_vector(xi));
  const TrackingResult res =
      track(vol, depth, kTrackK, init, nullptr, TrackingConfig{});
  CHECK(res.valid_pixels > 2500);
  CHECK(res.converged);
  CHECK(res.pose.translation().norm() < 1e-3);
  CHECK(rotation_angle(res.pose) < 1e-3);
  // accepted steps never raise the energy
  REQUIRE(res.energy_trace.size() >= 2);
  for (size_t i = 1; i < res.energy_trace.size(); ++i) {
    CHECK(res.energy_trace[i] <= res.energy_trace[i - 1] + 1e-12);
  }
  CHECK(res.energy == doctest::Approx(res.energy_trace.back()));
}

TEST_CASE("recovery works across many perturbation directions") {
  const TsdfVolume vol = corner_volume();
  const Image<float> depth = corner_depth();
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    Vec6 xi;
    for (int a = 0; a < 3; ++a) xi[a] = 0.02 * u(rng);
    for (int a = 3; a < 6; ++a) xi[a] = 0.017 * u(rng);  // ~1 deg
    const TrackingResult res = track(vol, depth, kTrackK,
                                     se3_exp(Twist::from_vector(xi)), nullptr,
                                     TrackingConfig{});
    CHECK(res.pose.translation().norm() < 2e-3);
    CHECK(rotation_angle(res.pose) < 3.5e-3);  // 0.2 deg
  }
}

TEST_CASE("association weights gate pixels out") {
  const TsdfVolume vol = corner_volume();
  const Image<float> depth = corner_depth();
  Image<float> q(kTrackK.width, kTrackK.height, 0.f);
  CHECK_THROWS_AS(
      track(vol, depth, kTrackK, Pose::identity(), &q, TrackingConfig{}),
      TrackingUnreliableError);
  q.fill(1.f);
  const TrackingResult with_q =
      track(vol, depth, kTrackK, Pose::identity(), &q, TrackingConfig{});
  const TrackingResult without =
      track(vol, depth, kTrackK, Pose::identity(), nullptr, TrackingConfig{});
  CHECK((with_q.pose.translation() - without.pose.translation()).norm() < 1e-12);
  CHECK(with_q.valid_pixels == without.valid_pixels);
}

TEST_CASE("a lone wall leaves the in-plane motions free") {
  // back wall only: x/y translation and roll are unobservable
  TsdfVolume vol(Vec3(0, 0, 0.8), Eigen::Vector3i(64, 64, 64), 0.025);
  const float tr = static_cast<float>(vol.truncation());
  for (int k = 0; k < 64; ++k) {
    for (int j = 0; j < 64; ++j) {
      for (int i = 0; i < 64; ++i) {
        const float v = static_cast<float>(1.2 - vol.voxel_center(i, j, k).z());
        vol.set_voxel(i, j, k, std::clamp(v, -tr, tr), 1.0f);
      }
    }
  }
  Image<float> depth(kTrackK.width, kTrackK.height, 1.2f);
  CHECK_THROWS_AS(
      track(vol, depth, kTrackK, Pose::identity(), nullptr, TrackingConfig{}),
      DegenerateGeometryError);
}

TEST_CASE("too few valid pixels is an error") {
  const TsdfVolume vol = corner_volume();
  Image<float> depth(kTrackK.width, kTrackK.height, 0.f);
  CHECK_THROWS_AS(
      track(vol, depth, kTrackK, Pose::identity(), nullptr, TrackingConfig{}),
      TrackingUnreliableError);
  // a handful of pixels is still below the floor
  for (int i = 0; i < 100; ++i) depth.at(i % 64, i / 64) = 1.0f;
  CHECK_THROWS_AS(
      track(vol, depth, kTrackK, Pose::identity(), nullptr, TrackingConfig{}),
      TrackingUnreliableError);
}

TEST_CASE("pool and serial tracking agree") {
  const TsdfVolume vol = corner_volume();
  const Image<float> depth = corner_depth();
  Vec6 xi;
  xi << 0.005, 0.004, -0.006, 0.003, -0.002, 0.004;
  const Pose init = se3_exp(Twist::from_vector(xi));
  const TrackingResult serial =
      track(vol, depth, kTrackK, init, nullptr, TrackingConfig{});
  ThreadPool pool(4);
  const TrackingResult par =
      track(vol, depth, kTrackK, init, nullptr, TrackingConfig{}, &pool);
  CHECK(serial.iterations == par.iterations);
  CHECK((serial.pose.translation() - par.pose.translation()).norm() == 0.0);
  CHECK((serial.pose.rotation() - par.pose.rotation()).norm() == 0.0);
  CHECK(serial.energy == par.energy);
}

}  // TEST_SUITE
