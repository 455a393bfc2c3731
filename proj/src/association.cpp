#include "mvf/association.hpp"

#include <cmath>
#include <stdexcept>

#include "mvf/kernels.hpp"
#include "mvf/parallel.hpp"

namespace mvf {

double data_likelihood(const TsdfVolume& vol, const Pose& vol_from_cam,
                       const Vec2& pixel, double depth, const Intrinsics& k,
                       const LikelihoodParams& p) {
  if (!(depth > 0)) throw InvalidDepthError("data_likelihood: depth must be > 0");
  const Vec3 p_cam = backproject(pixel, depth, k);
  const Vec3 p_vol = vol_from_cam * p_cam;
  const auto psi = vol.interpolate_sdf(p_vol);
  if (!psi) return 0.0;
  const double pfg = vol.foreground_prob(p_vol);
  const double lap =
      p.alpha / (2.0 * p.sigma) * std::exp(-std::abs(*psi) / p.sigma);
  return lap * pfg + (1.0 - p.alpha) * p.uniform_density;
}

AssociationField compute_association(const Image<float>& depth,
                                     const Intrinsics& k,
                                     const std::vector<ModelView>& models,
                                     const LikelihoodParams& p,
                                     ThreadPool* pool) {
  if (!k.valid() || !depth.same_size(k.width, k.height)) {
    throw std::invalid_argument("compute_association: depth/intrinsics mismatch");
  }
  AssociationField out;
  out.width = k.width;
  out.height = k.height;
  out.valid = Image<uint8_t>(k.width, k.height, 0);
  if (models.empty()) return out;

  const kernels::Table& table = kernels::active();
  for (const ModelView& mv : models) {
    out.model_ids.push_back(mv.id);
    Image<float> plane(k.width, k.height, 0.f);
    kernels::LikelihoodArgs a;
    a.depth = depth.data();
    a.img_w = k.width;
    a.img_h = k.height;
    a.vol_from_cam = to_mat34f(mv.vol_from_cam);
    a.sdf = mv.volume->raw_sdf();
    a.fg = mv.volume->raw_fg();
    a.bg = mv.volume->raw_bg();
    const Eigen::Vector3i res = mv.volume->resolution();
    a.nx = res.x();
    a.ny = res.y();
    a.nz = res.z();
    const Vec3 o = mv.volume->origin();
    const double inv_voxel = 1.0 / mv.volume->voxel_size();
    a.oshift[0] = static_cast<float>(-o.x() * inv_voxel);
    a.oshift[1] = static_cast<float>(-o.y() * inv_voxel);
    a.oshift[2] = static_cast<float>(-o.z() * inv_voxel);
    a.inv_voxel = static_cast<float>(inv_voxel);
    a.inv_fx = static_cast<float>(1.0 / k.fx);
    a.inv_fy = static_cast<float>(1.0 / k.fy);
    a.cx = static_cast<float>(k.cx);
    a.cy = static_cast<float>(k.cy);
    a.amp = static_cast<float>(p.alpha / (2.0 * p.sigma));
    a.inv_sigma = static_cast<float>(1.0 / p.sigma);
    a.floor_term = static_cast<float>((1.0 - p.alpha) * p.uniform_density);
    a.out = plane.data();
    for_chunks(pool, 0, k.height, 16,
               [&](int y0, int y1) { table.likelihood_rows(a, y0, y1); });
    out.q.push_back(std::move(plane));
  }

  const int n = static_cast<int>(models.size());
  for_chunks(pool, 0, k.height, 16, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < k.width; ++x) {
        double sum = 0;
        for (int c = 0; c < n; ++c) sum += out.q[c].at(x, y);
        if (sum > 0) {
          const double inv = 1.0 / sum;
          for (int c = 0; c < n; ++c) {
            out.q[c].at(x, y) = static_cast<float>(out.q[c].at(x, y) * inv);
          }
          out.valid.at(x, y) = 1;
        } else {
          for (int c = 0; c < n; ++c) out.q[c].at(x, y) = 0.f;
        }
      }
    }
  });
  return out;
}

}  // namespace mvf
