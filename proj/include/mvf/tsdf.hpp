#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mvf/geometry.hpp"
#include "mvf/image.hpp"
#include "mvf/kernels.hpp"

namespace mvf {

class ThreadPool;

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool valid() const { return (max.array() >= min.array()).all(); }
  Vec3 extent() const { return max - min; }
  double volume() const {
    return valid() ? extent().prod() : 0.0;
  }
  Aabb intersection(const Aabb& o) const {
    return {min.cwiseMax(o.min), max.cwiseMin(o.max)};
  }
  Aabb united(const Aabb& o) const {
    return {min.cwiseMin(o.min), max.cwiseMax(o.max)};
  }
};

double aabb_iou(const Aabb& a, const Aabb& b);
// Axis-aligned bounds of a transformed box (8 corners).
Aabb aabb_transformed(const Aabb& box, const Pose& pose);

kernels::Mat34f to_mat34f(const Pose& pose);

// Voxel grid of truncated signed distances. Values live at voxel centers;
// voxel (i,j,k) center sits at origin() + voxel_size * (i,j,k). Untouched
// voxels hold +truncation with zero weight.
class TsdfVolume {
 public:
  TsdfVolume(const Vec3& center, const Eigen::Vector3i& resolution,
             double voxel_size, double weight_cap = 64.0,
             double truncation = 0.0 /* 0 -> 10 * voxel_size */);

  const Vec3& center() const { return center_; }
  const Eigen::Vector3i& resolution() const { return res_; }
  double voxel_size() const { return voxel_; }
  double truncation() const { return trunc_; }
  double weight_cap() const { return wmax_; }
  Vec3 origin() const;
  Aabb local_aabb() const;  // outer boundary of the grid box

  size_t voxel_count() const { return sdf_.size(); }
  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(k) * res_.y() + j) * res_.x() + i;
  }
  Vec3 voxel_center(int i, int j, int k) const;

  float sdf_at(int i, int j, int k) const { return sdf_[index(i, j, k)]; }
  float weight_at(int i, int j, int k) const { return weight_[index(i, j, k)]; }
  void set_voxel(int i, int j, int k, float sdf, float weight) {
    sdf_[index(i, j, k)] = sdf;
    weight_[index(i, j, k)] = weight;
  }

  bool has_counts() const { return !fg_.empty(); }
  void ensure_counts();
  float fg_at(int i, int j, int k) const { return fg_[index(i, j, k)]; }
  float bg_at(int i, int j, int k) const { return bg_[index(i, j, k)]; }
  void set_counts(int i, int j, int k, float fg, float bg) {
    ensure_counts();
    fg_[index(i, j, k)] = fg;
    bg_[index(i, j, k)] = bg;
  }

  float* raw_sdf() { return sdf_.data(); }
  const float* raw_sdf() const { return sdf_.data(); }
  float* raw_weight() { return weight_.data(); }
  const float* raw_weight() const { return weight_.data(); }
  const float* raw_fg() const { return fg_.empty() ? nullptr : fg_.data(); }
  const float* raw_bg() const { return bg_.empty() ? nullptr : bg_.data(); }

  // True when p has full trilinear support.
  bool contains(const Vec3& p) const;

  std::optional<double> interpolate_sdf(const Vec3& p) const;
  std::optional<double> interpolate_weight(const Vec3& p) const;
  // Trilinear foreground probability from the Fg/Bg counts; 0.5 where counts
  // are absent or empty, and outside the grid.
  double foreground_prob(const Vec3& p) const;
  // Gradient of the trilinear interpolant.
  std::optional<Vec3> sdf_gradient(const Vec3& p) const;
  // Fused sample for tracking; returns false outside support. The weight out
  // is the smallest corner weight of the cell: 0 whenever any corner is
  // unobserved and the sdf blend picks up the truncation default.
  bool sample(const Vec3& p, double* sdf, Vec3* grad, double* weight) const;

  // Projective integration of one depth map: per voxel,
  // psi <- (W psi + q psi_obs) / (W + q), W <- min(W_max, W + q), skipping
  // voxels more than truncation behind the measured surface. q defaults to 1.
  void integrate_depth(const Image<float>& depth, const Intrinsics& k,
                       const Pose& vol_from_cam,
                       const Image<float>* assoc_q = nullptr,
                       ThreadPool* pool = nullptr);

  // Foreground/background evidence votes: every voxel projecting to an
  // eligible pixel gets Fg += 1 where the mask is set, else Bg += 1.
  void integrate_counts(const Image<uint8_t>& fg_mask,
                        const Image<uint8_t>& eligible, const Intrinsics& k,
                        const Pose& vol_from_cam, ThreadPool* pool = nullptr);

  // Copy into a new grid with the given resolution/center. The center shift
  // must be a multiple of voxel_size; new voxels get (+truncation, 0).
  TsdfVolume resized(const Eigen::Vector3i& new_res, const Vec3& new_center) const;
  // Grow (in 32-voxel steps per axis) until box, padded by pad voxels, fits.
  // Returns false if the volume already fits.
  bool resize_to_fit(const Aabb& box_local, int pad_voxels);

  void save(std::ostream& os) const;
  static TsdfVolume load(std::istream& is);

 private:
  Vec3 center_;
  Eigen::Vector3i res_;
  double voxel_;
  double trunc_;
  float wmax_;
  std::vector<float> sdf_;
  std::vector<float> weight_;
  std::vector<float> fg_;
  std::vector<float> bg_;
};

}  // namespace mvf
