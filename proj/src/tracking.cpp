#include "mvf/tracking.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "mvf/parallel.hpp"

namespace mvf {

double huber_rho(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

namespace {

struct PixRec {
  double r;
  double J[6];
  double w;  // map weight W, <= 0 marks invalid
  double q;
};

// Fills recs (one slot per pixel) and returns {valid count, max map weight}.
std::pair<int, double> eval_residuals(const TsdfVolume& vol,
                                      const Image<float>& depth,
                                      const Intrinsics& k, const Pose& pose,
                                      const Image<float>* q_plane,
                                      std::vector<PixRec>& recs,
                                      ThreadPool* pool) {
  const int w = depth.width(), h = depth.height();
  const Mat3 R = pose.rotation();
  const Vec3 t = pose.translation();
  using Partial = std::pair<int, double>;
  return reduce_chunks(
      pool, 0, h, 8, Partial{0, 0.0},
      [&](int y0, int y1, Partial acc) {
        for (int y = y0; y < y1; ++y) {
          const float* drow = depth.row(y);
          const float* qrow = q_plane ? q_plane->row(y) : nullptr;
          PixRec* rrow = recs.data() + static_cast<size_t>(y) * w;
          for (int x = 0; x < w; ++x) {
            rrow[x].w = -1.0;
            const double d = drow[x];
            if (!(d > 0)) continue;
            const double q = qrow ? qrow[x] : 1.0;
            if (!(q > 0)) continue;
            const Vec3 p_cam((x - k.cx) / k.fx * d, (y - k.cy) / k.fy * d, d);
            const Vec3 p_vol = R * p_cam + t;
            double psi, W;
            Vec3 g;
            if (!vol.sample(p_vol, &psi, &g, &W)) continue;
            if (!(W > 0)) continue;
            const Vec3 a = R.transpose() * g;
            const Vec3 pxa = p_cam.cross(a);
            PixRec& rec = rrow[x];
            rec.r = psi;
            rec.J[0] = a.x();
            rec.J[1] = a.y();
            rec.J[2] = a.z();
            rec.J[3] = pxa.x();
            rec.J[4] = pxa.y();
            rec.J[5] = pxa.z();
            rec.w = W;
            rec.q = q;
            acc.first += 1;
            if (W > acc.second) acc.second = W;
          }
        }
        return acc;
      },
      [](Partial a, Partial b) {
        return Partial{a.first + b.first,
                       a.second > b.second ? a.second : b.second};
      });
}

struct Accum {
  Mat6 H = Mat6::Zero();
  Vec6 g = Vec6::Zero();
  double energy = 0.0;
};

Accum accumulate(const std::vector<PixRec>& recs, int w, int h, double max_w,
                 double delta, ThreadPool* pool) {
  const double inv_max = max_w > 0 ? 1.0 / max_w : 0.0;
  auto chunk_fn = [&](int y0, int y1, Accum acc) {
    for (int y = y0; y < y1; ++y) {
      const PixRec* rrow = recs.data() + static_cast<size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        const PixRec& rec = rrow[x];
        if (!(rec.w > 0)) continue;
        const double conf = rec.w * inv_max;
        const double base = rec.q * conf;
        acc.energy += base * huber_rho(rec.r, delta);
        const double wi = base * huber_weight(rec.r, delta);
        const Eigen::Map<const Vec6> J(rec.J);
        acc.H.selfadjointView<Eigen::Lower>().rankUpdate(J, wi);
        acc.g.noalias() += (wi * rec.r) * J;
      }
    }
    return acc;
  };
  auto combine = [](Accum a, Accum b) {
    a.H += b.H;
    a.g += b.g;
    a.energy += b.energy;
    return a;
  };
  Accum out = reduce_chunks(pool, 0, h, 8, Accum{}, chunk_fn, combine);
  out.H = out.H.selfadjointView<Eigen::Lower>();
  return out;
}

}  // namespace

std::vector<ResidualSample> tracking_residuals(const TsdfVolume& vol,
                                               const Image<float>& depth,
                                               const Intrinsics& k,
                                               const Pose& vol_from_cam,
                                               const Image<float>* q_plane) {
  std::vector<PixRec> recs(static_cast<size_t>(depth.width()) * depth.height());
  eval_residuals(vol, depth, k, vol_from_cam, q_plane, recs, nullptr);
  std::vector<ResidualSample> out;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const PixRec& rec = recs[static_cast<size_t>(y) * depth.width() + x];
      if (!(rec.w > 0)) continue;
      ResidualSample s;
      s.x = x;
      s.y = y;
      s.r = rec.r;
      s.jacobian = Eigen::Map<const Vec6>(rec.J);
      s.map_weight = rec.w;
      s.q = rec.q;
      out.push_back(s);
    }
  }
  return out;
}

TrackingResult track(const TsdfVolume& vol, const Image<float>& depth,
                     const Intrinsics& k, const Pose& init_vol_from_cam,
                     const Image<float>* q_plane, const TrackingConfig& cfg,
                     ThreadPool* pool) {
  if (!k.valid() || !depth.same_size(k.width, k.height)) {
    throw std::invalid_argument("track: depth/intrinsics mismatch");
  }
  if (q_plane && !q_plane->same_size(k.width, k.height)) {
    throw std::invalid_argument("track: assoc plane size mismatch");
  }
  const double delta =
      cfg.huber_delta > 0 ? cfg.huber_delta : 2.0 * vol.voxel_size();

  const int w = depth.width(), h = depth.height();
  std::vector<PixRec> recs(static_cast<size_t>(w) * h);
  std::vector<PixRec> cand_recs(static_cast<size_t>(w) * h);

  auto [count, max_w] =
      eval_residuals(vol, depth, k, init_vol_from_cam, q_plane, recs, pool);
  if (count < cfg.min_valid_pixels) {
    throw TrackingUnreliableError("track: only " + std::to_string(count) +
                                  " valid pixels");
  }

  TrackingResult res;
  res.pose = init_vol_from_cam;
  res.valid_pixels = count;
  Accum acc = accumulate(recs, w, h, max_w, delta, pool);
  res.energy = acc.energy;
  res.energy_trace.push_back(acc.energy);

  double lambda = cfg.lambda_init;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    res.iterations = iter + 1;
    const Eigen::SelfAdjointEigenSolver<Mat6> es(acc.H,
                                                 Eigen::EigenvaluesOnly);
    const double ev_min = es.eigenvalues().minCoeff();
    const double ev_max = es.eigenvalues().maxCoeff();
    if (!(ev_max > 0) || ev_min < 1e-9 * ev_max) {
      throw DegenerateGeometryError(
          "track: rank-deficient normal equations (flat or empty geometry)");
    }
    Mat6 damped = acc.H;
    damped.diagonal() *= (1.0 + lambda);
    const Vec6 step = damped.ldlt().solve(-acc.g);
    if (!step.allFinite()) {
      throw DegenerateGeometryError("track: singular damped system");
    }
    const Pose cand = res.pose * se3_exp(Twist::from_vector(step));
    auto [c_count, c_max_w] =
        eval_residuals(vol, depth, k, cand, q_plane, cand_recs, pool);
    if (c_count < cfg.min_valid_pixels) {
      lambda *= cfg.lambda_factor;
      if (lambda > 1e8) break;
      continue;
    }
    const Accum c_acc = accumulate(cand_recs, w, h, c_max_w, delta, pool);
    if (c_acc.energy <= res.energy) {
      res.pose = cand;
      res.energy = c_acc.energy;
      res.energy_trace.push_back(c_acc.energy);
      res.valid_pixels = c_count;
      acc = c_acc;
      recs.swap(cand_recs);
      lambda = std::max(lambda / cfg.lambda_factor, 1e-10);
      if (step.norm() < cfg.convergence_norm) {
        res.converged = true;
        break;
      }
    } else {
      lambda *= cfg.lambda_factor;
      if (lambda > 1e8) break;
    }
  }
  return res;
}

}  // namespace mvf
