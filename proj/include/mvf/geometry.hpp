#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "mvf/errors.hpp"
#include "mvf/image.hpp"

namespace mvf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Twist coordinates, linear part first.
struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  Vec6 vector() const {
    Vec6 v;
    v << linear, angular;
    return v;
  }
  static Twist from_vector(const Vec6& v) {
    Twist t;
    t.linear = v.head<3>();
    t.angular = v.tail<3>();
    return t;
  }
  double norm() const { return vector().norm(); }
};

class Pose {
 public:
  Pose() : rot_(Mat3::Identity()), trans_(Vec3::Zero()) {}
  Pose(const Mat3& rot, const Vec3& trans) : rot_(rot), trans_(trans) {}

  static Pose identity() { return Pose(); }

  const Mat3& rotation() const { return rot_; }
  const Vec3& translation() const { return trans_; }

  Pose operator*(const Pose& rhs) const {
    Pose out(rot_ * rhs.rot_, rot_ * rhs.trans_ + trans_);
    out.renormalize();
    return out;
  }

  Vec3 operator*(const Vec3& p) const { return rot_ * p + trans_; }

  Pose inverse() const {
    Mat3 rt = rot_.transpose();
    return Pose(rt, -(rt * trans_));
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rot_;
    m.topRightCorner<3, 1>() = trans_;
    return m;
  }

  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rot_); }

  // Projects the rotation part back onto SO(3).
  void renormalize() {
    Eigen::Quaterniond q(rot_);
    q.normalize();
    rot_ = q.toRotationMatrix();
  }

  double rotation_orthogonality_error() const {
    return (rot_ * rot_.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  }

 private:
  Mat3 rot_;
  Vec3 trans_;
};

Mat3 skew(const Vec3& v);

Pose se3_exp(const Twist& xi);
// Throws NearSingularLogError for rotation angles within 1e-6 of pi.
Twist se3_log(const Pose& pose);

struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  double depth_scale = 5000.0;

  bool valid() const { return fx > 0 && fy > 0 && width > 0 && height > 0; }
};

// Pixel convention: integer coordinates sit at pixel centers.
Vec3 backproject(const Vec2& pixel, double depth, const Intrinsics& k);

struct Projection {
  Vec2 pixel;
  bool in_bounds = false;
};

Projection project(const Vec3& p_cam, const Intrinsics& k);

// Depth-aware edge-preserving smoothing. Zero depths are treated as holes:
// they contribute nothing and stay zero in the output.
class ThreadPool;
Image<float> bilateral_filter(const Image<float>& depth, double spatial_sigma,
                              double range_sigma, int radius,
                              ThreadPool* pool = nullptr);

}  // namespace mvf
