#pragma once

#include <vector>

#include "mvf/geometry.hpp"
#include "mvf/image.hpp"
#include "mvf/tsdf.hpp"

namespace mvf {

class ThreadPool;

struct TrackingConfig {
  double huber_delta = 0.0;  // 0 -> 2 * voxel_size of the tracked volume
  int max_iterations = 50;
  double lambda_init = 1e-4;
  double lambda_factor = 10.0;
  double convergence_norm = 1e-6;
  int min_valid_pixels = 500;
};

struct TrackingResult {
  Pose pose;  // updated vol_from_cam
  double energy = 0.0;
  int iterations = 0;
  int valid_pixels = 0;
  bool converged = false;
  std::vector<double> energy_trace;  // energy after each accepted step
};

double huber_rho(double r, double delta);
double huber_weight(double r, double delta);

struct ResidualSample {
  int x = 0, y = 0;
  double r = 0.0;          // interpolated sdf at the back-projected point
  Vec6 jacobian = Vec6::Zero();
  double map_weight = 0.0; // interpolated integration weight W
  double q = 1.0;          // association weight
};

// Residuals and analytic Jacobians of the alignment energy at `pose`
// (right-composed twist, linear part first). For tests and diagnostics.
std::vector<ResidualSample> tracking_residuals(const TsdfVolume& vol,
                                               const Image<float>& depth,
                                               const Intrinsics& k,
                                               const Pose& vol_from_cam,
                                               const Image<float>* q_plane);

// Direct SDF alignment: minimize sum_u q * conf * rho_delta(psi(T p_u)) over
// the camera-to-volume pose by damped Gauss-Newton (LM) with IRLS Huber
// weights; conf is the interpolated map weight normalized by the frame max.
TrackingResult track(const TsdfVolume& vol, const Image<float>& depth,
                     const Intrinsics& k, const Pose& init_vol_from_cam,
                     const Image<float>* q_plane, const TrackingConfig& cfg,
                     ThreadPool* pool = nullptr);

}  // namespace mvf
