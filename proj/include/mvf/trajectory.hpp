#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mvf/geometry.hpp"

namespace mvf {

struct StampedPose {
  double t = 0.0;
  Pose pose;
};

struct Trajectory {
  std::vector<StampedPose> poses;

  void append(double t, const Pose& p) {
    if (!poses.empty() && t <= poses.back().t) {
      throw std::invalid_argument("trajectory timestamps must strictly increase");
    }
    poses.push_back({t, p});
  }
  size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
};

// TUM text format: "timestamp tx ty tz qx qy qz qw", 6 decimals, '#' comments.
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path,
                      const std::string& header = "");
std::string format_trajectory(const Trajectory& traj,
                              const std::string& header = "");
Trajectory read_trajectory(const std::filesystem::path& path);

// Nearest-timestamp pairing within the window, each pose used at most once.
std::vector<std::pair<size_t, size_t>> associate_trajectories(
    const Trajectory& a, const Trajectory& b, double window = 0.02);

// Absolute trajectory error: closed-form rigid alignment of the matched
// translations, then RMSE of the residuals. Meters.
double ate_rmse(const Trajectory& est, const Trajectory& gt,
                double window = 0.02);

// Relative pose error over delta-second intervals, translational RMSE per
// second. Meters/second.
double rpe_rmse(const Trajectory& est, const Trajectory& gt, double delta = 1.0,
                double window = 0.02);

}  // namespace mvf
