#include "mvf/trajectory.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mvf/errors.hpp"

namespace mvf {

std::string format_trajectory(const Trajectory& traj, const std::string& header) {
  std::string out;
  if (!header.empty()) {
    out += "# " + header + "\n";
  }
  out += "# timestamp tx ty tz qx qy qz qw\n";
  char line[256];
  for (const StampedPose& sp : traj.poses) {
    Eigen::Quaterniond q = sp.pose.quaternion();
    q.normalize();
    const Vec3& t = sp.pose.translation();
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n",
                  sp.t, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out += line;
  }
  return out;
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path,
                      const std::string& header) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << format_trajectory(traj, header);
  if (!os) throw IoError("write failed: " + path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open trajectory: " + path.string());
  Trajectory out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": malformed trajectory line");
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-9) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": zero quaternion");
    }
    q.normalize();
    out.append(t, Pose(q.toRotationMatrix(), Vec3(tx, ty, tz)));
  }
  return out;
}

std::vector<std::pair<size_t, size_t>> associate_trajectories(
    const Trajectory& a, const Trajectory& b, double window) {
  std::vector<std::pair<size_t, size_t>> out;
  size_t j = 0;
  std::vector<bool> used(b.size(), false);
  for (size_t i = 0; i < a.size(); ++i) {
    const double t = a.poses[i].t;
    while (j + 1 < b.size() && b.poses[j + 1].t <= t) ++j;
    size_t best = b.size();
    double best_dt = window;
    for (size_t cand = (j > 0 ? j - 1 : 0); cand < b.size() && cand <= j + 2;
         ++cand) {
      const double dt = std::abs(b.poses[cand].t - t);
      if (dt <= best_dt && !used[cand]) {
        best_dt = dt;
        best = cand;
      }
    }
    if (best < b.size()) {
      used[best] = true;
      out.emplace_back(i, best);
    }
  }
  return out;
}

namespace {

// Least-squares rigid transform S with S(p_i) ~ q_i (Kabsch/SVD).
Pose rigid_align(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
  const size_t n = p.size();
  Vec3 mp = Vec3::Zero(), mq = Vec3::Zero();
  for (size_t i = 0; i < n; ++i) {
    mp += p[i];
    mq += q[i];
  }
  mp /= static_cast<double>(n);
  mq /= static_cast<double>(n);
  Mat3 C = Mat3::Zero();
  for (size_t i = 0; i < n; ++i) {
    C += (q[i] - mq) * (p[i] - mp).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) {
    D(2, 2) = -1.0;
  }
  const Mat3 R = svd.matrixU() * D * svd.matrixV().transpose();
  return Pose(R, mq - R * mp);
}

}  // namespace

double ate_rmse(const Trajectory& est, const Trajectory& gt, double window) {
  const auto pairs = associate_trajectories(est, gt, window);
  if (pairs.size() < 2) {
    throw TooFewPairsError("ate_rmse: " + std::to_string(pairs.size()) +
                           " associated pairs");
  }
  std::vector<Vec3> p, q;
  p.reserve(pairs.size());
  q.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    p.push_back(est.poses[i].pose.translation());
    q.push_back(gt.poses[j].pose.translation());
  }
  const Pose S = rigid_align(p, q);
  double sum = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    sum += (S * p[i] - q[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(p.size()));
}

double rpe_rmse(const Trajectory& est, const Trajectory& gt, double delta,
                double window) {
  const auto pairs = associate_trajectories(est, gt, window);
  if (pairs.size() < 2) {
    throw TooFewPairsError("rpe_rmse: too few associated pairs");
  }
  double sum = 0;
  size_t count = 0;
  for (size_t a = 0; a < pairs.size(); ++a) {
    const double target = est.poses[pairs[a].first].t + delta;
    size_t best = pairs.size();
    double best_dt = window;
    for (size_t b = a + 1; b < pairs.size(); ++b) {
      const double dt = std::abs(est.poses[pairs[b].first].t - target);
      if (dt <= best_dt) {
        best_dt = dt;
        best = b;
      }
      if (est.poses[pairs[b].first].t > target + window) break;
    }
    if (best >= pairs.size()) continue;
    const Pose& Pi = est.poses[pairs[a].first].pose;
    const Pose& Pj = est.poses[pairs[best].first].pose;
    const Pose& Qi = gt.poses[pairs[a].second].pose;
    const Pose& Qj = gt.poses[pairs[best].second].pose;
    const Pose err = (Qi.inverse() * Qj).inverse() * (Pi.inverse() * Pj);
    sum += err.translation().squaredNorm();
    ++count;
  }
  if (count < 1) {
    throw TooFewPairsError("rpe_rmse: no delta-separated interval pairs");
  }
  return std::sqrt(sum / static_cast<double>(count)) / delta;
}

}  // namespace mvf
