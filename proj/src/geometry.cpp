#include "mvf/geometry.hpp"

#include <cmath>

namespace mvf {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Pose se3_exp(const Twist& xi) {
  const Vec3& w = xi.angular;
  const Vec3& v = xi.linear;
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = skew(w);
  double a, b, c;  // sin t/t, (1-cos t)/t^2, (t - sin t)/t^3
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 W2 = W * W;
  const Mat3 R = Mat3::Identity() + a * W + b * W2;
  const Mat3 V = Mat3::Identity() + b * W + c * W2;
  return Pose(R, V * v);
}

Twist se3_log(const Pose& pose) {
  const Mat3& R = pose.rotation();
  const double tr = R.trace();
  double cos_theta = (tr - 1.0) * 0.5;
  cos_theta = std::clamp(cos_theta, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta > M_PI - 1e-6) {
    throw NearSingularLogError("rotation angle within 1e-6 of pi");
  }
  Vec3 w;
  if (theta < 1e-8) {
    w = 0.5 * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  } else {
    const double s = theta / (2.0 * std::sin(theta));
    w = s * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  }
  const double theta2 = w.squaredNorm();
  const Mat3 W = skew(w);
  Mat3 Vinv;
  if (theta < 1e-8) {
    Vinv = Mat3::Identity() - 0.5 * W + (1.0 / 12.0) * (W * W);
  } else {
    const double t = std::sqrt(theta2);
    const double half = 0.5 * t;
    const double cot_half = std::cos(half) / std::sin(half);
    const double k = (1.0 - half * cot_half) / theta2;
    Vinv = Mat3::Identity() - 0.5 * W + k * (W * W);
  }
  Twist xi;
  xi.angular = w;
  xi.linear = Vinv * pose.translation();
  return xi;
}

Vec3 backproject(const Vec2& pixel, double depth, const Intrinsics& k) {
  if (!(depth > 0)) throw InvalidDepthError("backproject: depth must be > 0");
  const double x = (pixel.x() - k.cx) / k.fx * depth;
  const double y = (pixel.y() - k.cy) / k.fy * depth;
  return Vec3(x, y, depth);
}

Projection project(const Vec3& p_cam, const Intrinsics& k) {
  if (!(p_cam.z() > 0)) throw BehindCameraError("project: point has z <= 0");
  Projection out;
  out.pixel = Vec2(k.fx * p_cam.x() / p_cam.z() + k.cx,
                   k.fy * p_cam.y() / p_cam.z() + k.cy);
  out.in_bounds = out.pixel.x() >= 0 && out.pixel.x() <= k.width - 1 &&
                  out.pixel.y() >= 0 && out.pixel.y() <= k.height - 1;
  return out;
}

}  // namespace mvf
