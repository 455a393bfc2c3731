#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "mvf/kernels.hpp"

// Shared scalar bodies for both backend TUs. All arithmetic is written with
// explicit fmaf and fixed evaluation order; the AVX2 lane mirrors the same op
// sequence, so results agree lane-for-lane except where noted (exp).

namespace mvf::kernels::detail {

inline float bilateral_pixel(const BilateralArgs& a, int x, int y) {
  const int r = a.radius, w = a.width, h = a.height;
  const int side = 2 * r + 1;
  const float* srow = a.src + static_cast<size_t>(y) * w;
  const float d0 = srow[x];
  if (!(d0 > 0.f)) return 0.f;
  const int dy_lo = y - r < 0 ? -y : -r;
  const int dy_hi = y + r > h - 1 ? h - 1 - y : r;
  const int dx_lo = x - r < 0 ? -x : -r;
  const int dx_hi = x + r > w - 1 ? w - 1 - x : r;
  float acc_w = 0.f, acc_wd = 0.f;
  for (int dy = dy_lo; dy <= dy_hi; ++dy) {
    const float* nrow = a.src + static_cast<size_t>(y + dy) * w + x;
    const float* lut = a.spatial_lut + static_cast<size_t>(dy + r) * side + r;
    for (int dx = dx_lo; dx <= dx_hi; ++dx) {
      const float d = nrow[dx];
      if (!(d > 0.f)) continue;
      const float t = d - d0;
      const float nt2 = -(t * t);
      const float arg = nt2 * a.inv2_range_sigma2;
      const float wgt = lut[dx] * std::exp(arg);
      acc_w += wgt;
      acc_wd = std::fmaf(wgt, d, acc_wd);
    }
  }
  return acc_wd / acc_w;
}

struct RowBase3 {
  float x, y, z;
};

// cam_from_vol applied to (px,py,pz): per-(j,k) partial over the y,z columns.
inline RowBase3 integrate_row_base(const IntegrateArgs& a, int j, int k) {
  const float* M = a.cam_from_vol.m;
  const float pz = std::fmaf(static_cast<float>(k), a.voxel, a.origin[2]);
  const float py = std::fmaf(static_cast<float>(j), a.voxel, a.origin[1]);
  RowBase3 b;
  b.x = std::fmaf(M[1], py, std::fmaf(M[2], pz, M[3]));
  b.y = std::fmaf(M[5], py, std::fmaf(M[6], pz, M[7]));
  b.z = std::fmaf(M[9], py, std::fmaf(M[10], pz, M[11]));
  return b;
}

inline void integrate_span(const IntegrateArgs& a, const RowBase3& b, int j, int k,
                           int i0, int i1) {
  const float* M = a.cam_from_vol.m;
  float* srow = a.sdf + (static_cast<size_t>(k) * a.ny + j) * a.nx;
  float* wrow = a.weight + (static_cast<size_t>(k) * a.ny + j) * a.nx;
  for (int i = i0; i < i1; ++i) {
    const float px = std::fmaf(static_cast<float>(i), a.voxel, a.origin[0]);
    const float xc = std::fmaf(M[0], px, b.x);
    const float yc = std::fmaf(M[4], px, b.y);
    const float zc = std::fmaf(M[8], px, b.z);
    if (!(zc > 0.f)) continue;
    const float u = std::fmaf(a.fx, xc / zc, a.cx);
    const float v = std::fmaf(a.fy, yc / zc, a.cy);
    const int ui = static_cast<int>(lrintf(u));
    const int vi = static_cast<int>(lrintf(v));
    if (ui < 0 || ui >= a.img_w || vi < 0 || vi >= a.img_h) continue;
    const size_t pix = static_cast<size_t>(vi) * a.img_w + ui;
    const float d = a.depth[pix];
    if (!(d > 0.f)) continue;
    const float qv = a.q ? a.q[pix] : 1.f;
    if (!(qv > 0.f)) continue;
    const float obs = d - zc;
    if (obs < -a.trunc) continue;
    const float psi_obs = obs < a.trunc ? obs : a.trunc;
    const double W = wrow[i], P = srow[i], qd = qv, od = psi_obs;
    const double Wn = W + qd;
    const double t0 = W * P;
    const double t1 = qd * od;
    const double Pn = (t0 + t1) / Wn;
    const double wm = a.wmax;
    const double Wc = Wn < wm ? Wn : wm;
    srow[i] = static_cast<float>(Pn);
    wrow[i] = static_cast<float>(Wc);
  }
}

inline float lerpf(float a, float b, float t) { return std::fmaf(t, b - a, a); }

inline float trilerp(const float* g, int base, int sx, int sy, int sz, float tx,
                     float ty, float tz) {
  const float c000 = g[base], c100 = g[base + sx];
  const float c010 = g[base + sy], c110 = g[base + sy + sx];
  const float c001 = g[base + sz], c101 = g[base + sz + sx];
  const float c011 = g[base + sz + sy], c111 = g[base + sz + sy + sx];
  const float x00 = lerpf(c000, c100, tx);
  const float x10 = lerpf(c010, c110, tx);
  const float x01 = lerpf(c001, c101, tx);
  const float x11 = lerpf(c011, c111, tx);
  const float y0 = lerpf(x00, x10, ty);
  const float y1 = lerpf(x01, x11, ty);
  return lerpf(y0, y1, tz);
}

inline RowBase3 likelihood_row_base(const LikelihoodArgs& a, int y) {
  const float* M = a.vol_from_cam.m;
  const float diry = (static_cast<float>(y) - a.cy) * a.inv_fy;
  RowBase3 b;
  b.x = std::fmaf(M[1], diry, M[2]);
  b.y = std::fmaf(M[5], diry, M[6]);
  b.z = std::fmaf(M[9], diry, M[10]);
  return b;
}

inline float likelihood_pixel(const LikelihoodArgs& a, const RowBase3& b, int x,
                              float d) {
  if (!(d > 0.f)) return 0.f;
  const float* M = a.vol_from_cam.m;
  const float dirx = (static_cast<float>(x) - a.cx) * a.inv_fx;
  const float rdx = std::fmaf(M[0], dirx, b.x);
  const float rdy = std::fmaf(M[4], dirx, b.y);
  const float rdz = std::fmaf(M[8], dirx, b.z);
  const float mx = std::fmaf(d, rdx, M[3]);
  const float my = std::fmaf(d, rdy, M[7]);
  const float mz = std::fmaf(d, rdz, M[11]);
  const float gx = std::fmaf(mx, a.inv_voxel, a.oshift[0]);
  const float gy = std::fmaf(my, a.inv_voxel, a.oshift[1]);
  const float gz = std::fmaf(mz, a.inv_voxel, a.oshift[2]);
  const float fx = std::floor(gx), fy = std::floor(gy), fz = std::floor(gz);
  const int i0 = static_cast<int>(fx), j0 = static_cast<int>(fy),
            k0 = static_cast<int>(fz);
  if (i0 < 0 || j0 < 0 || k0 < 0 || i0 >= a.nx - 1 || j0 >= a.ny - 1 ||
      k0 >= a.nz - 1) {
    return 0.f;
  }
  const float tx = gx - fx, ty = gy - fy, tz = gz - fz;
  const int plane = a.nx * a.ny;
  const int base = (k0 * a.ny + j0) * a.nx + i0;
  const float psi = trilerp(a.sdf, base, 1, a.nx, plane, tx, ty, tz);
  float pfg = 0.5f;
  if (a.fg) {
    const float F = trilerp(a.fg, base, 1, a.nx, plane, tx, ty, tz);
    const float B = trilerp(a.bg, base, 1, a.nx, plane, tx, ty, tz);
    const float s = F + B;
    if (s > 0.f) pfg = F / s;
  }
  const float t = std::fabs(psi) * a.inv_sigma;
  const float e = std::exp(-t);
  const float lap = a.amp * e;
  return std::fmaf(lap, pfg, a.floor_term);
}

}  // namespace mvf::kernels::detail
