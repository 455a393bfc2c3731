#include "mvf/raycast.hpp"

#include <cmath>
#include <limits>

#include "mvf/parallel.hpp"

namespace mvf {

namespace {

struct ModelCtx {
  const RenderModel* m;
  Mat3 R;
  Vec3 t;
  double voxel, trunc, coarse;
};

// Ray r(s) = o + s*d against the volume's outer box; s in depth units.
bool slab_range(const Vec3& o, const Vec3& d, const Aabb& box, double* s0,
                double* s1) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return false;
      continue;
    }
    double ta = (box.min[a] - o[a]) / d[a];
    double tb = (box.max[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    lo = std::max(lo, ta);
    hi = std::min(hi, tb);
  }
  if (hi < lo) return false;
  *s0 = lo;
  *s1 = hi;
  return true;
}

// Returns hit depth or a negative value.
double march(const ModelCtx& c, const Vec3& dir_cam, const RaycastOptions& opts) {
  const Vec3 o = c.t;                // camera origin in model frame
  const Vec3 d = c.R * dir_cam;      // model-frame direction per unit depth
  const double inv_len = 1.0 / d.norm();
  double s0, s1;
  if (!slab_range(o, d, c.m->volume->local_aabb(), &s0, &s1)) return -1.0;
  s0 = std::max(s0, opts.near);
  s1 = std::min(s1, opts.far);
  if (s1 <= s0) return -1.0;

  const TsdfVolume& vol = *c.m->volume;
  double s = s0;
  double prev_s = 0.0, prev_psi = 0.0;
  bool prev_valid = false;
  while (s <= s1) {
    const auto psi = vol.interpolate_sdf(o + s * d);
    if (!psi) {
      prev_valid = false;
      s += c.voxel * inv_len;
      continue;
    }
    if (prev_valid && prev_psi > 0 && *psi <= 0) {
      double a = prev_s, fa = prev_psi;
      double b = s, fb = *psi;
      double hit = b;
      for (int it = 0; it < 4; ++it) {
        if (fa - fb == 0) break;
        const double m = a + fa * (b - a) / (fa - fb);
        const auto fm = vol.interpolate_sdf(o + m * d);
        if (!fm) break;
        hit = m;
        if (*fm > 0) {
          a = m;
          fa = *fm;
        } else {
          b = m;
          fb = *fm;
        }
      }
      bool ok = true;
      if (c.m->fg_gated) {
        ok = vol.foreground_prob(o + hit * d) > 0.5;
      }
      if (ok) return hit;
    }
    prev_valid = true;
    prev_s = s;
    prev_psi = *psi;
    const double step =
        (std::abs(*psi) > c.voxel ? c.coarse : c.voxel) * inv_len;
    s += step;
  }
  return -1.0;
}

}  // namespace

RenderResult raycast(const std::vector<RenderModel>& models, const Intrinsics& k,
                     const RaycastOptions& opts, ThreadPool* pool) {
  if (!k.valid()) throw std::invalid_argument("raycast: invalid intrinsics");
  RenderResult out;
  out.model_id = Image<int32_t>(k.width, k.height, -1);
  out.depth = Image<float>(k.width, k.height, 0.f);
  if (opts.normals) out.shaded = Image<Rgb8>(k.width, k.height);

  std::vector<ModelCtx> ctxs;
  ctxs.reserve(models.size());
  for (const RenderModel& m : models) {
    ModelCtx c;
    c.m = &m;
    c.R = m.vol_from_cam.rotation();
    c.t = m.vol_from_cam.translation();
    c.voxel = m.volume->voxel_size();
    c.trunc = m.volume->truncation();
    c.coarse = opts.step_scale * c.trunc;
    ctxs.push_back(c);
  }

  for_chunks(pool, 0, k.height, 8, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < k.width; ++x) {
        const Vec3 dir((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
        double best = std::numeric_limits<double>::infinity();
        int best_id = -1;
        const ModelCtx* best_ctx = nullptr;
        for (const ModelCtx& c : ctxs) {
          const double hit = march(c, dir, opts);
          if (hit > 0 && hit < best) {
            best = hit;
            best_id = c.m->id;
            best_ctx = &c;
          }
        }
        if (best_id >= 0) {
          out.model_id.at(x, y) = best_id;
          out.depth.at(x, y) = static_cast<float>(best);
          if (opts.normals && best_ctx) {
            const Vec3 p = best_ctx->t + best * (best_ctx->R * dir);
            const auto g = best_ctx->m->volume->sdf_gradient(p);
            uint8_t shade = 96;
            if (g && g->norm() > 1e-12) {
              Vec3 n_cam = best_ctx->R.transpose() * g->normalized();
              if (n_cam.z() > 0) n_cam = -n_cam;
              const double lambert = std::max(0.0, -n_cam.z());
              shade = static_cast<uint8_t>(40 + 215 * lambert);
            }
            out.shaded.at(x, y) = Rgb8{shade, shade, shade};
          }
        }
      }
    }
  });
  return out;
}

Image<uint8_t> model_mask(const RenderResult& render, int model_id) {
  Image<uint8_t> mask(render.model_id.width(), render.model_id.height(), 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (render.model_id.at(x, y) == model_id) mask.at(x, y) = 1;
    }
  }
  return mask;
}

}  // namespace mvf
