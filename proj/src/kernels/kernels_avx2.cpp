#include <immintrin.h>

#include "kernels_impl.hpp"
#include "mvf/kernels.hpp"

namespace mvf::kernels {
namespace {

// Cephes-style exp, ~1e-7 relative accuracy. The one place the AVX2 lane is
// allowed to differ from libm; equivalence tests use a tolerance there.
inline __m256 exp256_ps(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f),
                              _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);
  const __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, x);
  y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));
  __m256i imm0 = _mm256_cvttps_epi32(fx);
  imm0 = _mm256_add_epi32(imm0, _mm256_set1_epi32(0x7f));
  imm0 = _mm256_slli_epi32(imm0, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(imm0));
}

inline __m256 lerp8(__m256 a, __m256 b, __m256 t) {
  return _mm256_fmadd_ps(t, _mm256_sub_ps(b, a), a);
}

inline __m256 trilerp8(const float* g, __m256i base, int sx, int sy, int sz,
                       __m256 tx, __m256 ty, __m256 tz) {
  const __m256 c000 = _mm256_i32gather_ps(g, base, 4);
  const __m256 c100 =
      _mm256_i32gather_ps(g, _mm256_add_epi32(base, _mm256_set1_epi32(sx)), 4);
  const __m256 c010 =
      _mm256_i32gather_ps(g, _mm256_add_epi32(base, _mm256_set1_epi32(sy)), 4);
  const __m256 c110 = _mm256_i32gather_ps(
      g, _mm256_add_epi32(base, _mm256_set1_epi32(sy + sx)), 4);
  const __m256 c001 =
      _mm256_i32gather_ps(g, _mm256_add_epi32(base, _mm256_set1_epi32(sz)), 4);
  const __m256 c101 = _mm256_i32gather_ps(
      g, _mm256_add_epi32(base, _mm256_set1_epi32(sz + sx)), 4);
  const __m256 c011 = _mm256_i32gather_ps(
      g, _mm256_add_epi32(base, _mm256_set1_epi32(sz + sy)), 4);
  const __m256 c111 = _mm256_i32gather_ps(
      g, _mm256_add_epi32(base, _mm256_set1_epi32(sz + sy + sx)), 4);
  const __m256 x00 = lerp8(c000, c100, tx);
  const __m256 x10 = lerp8(c010, c110, tx);
  const __m256 x01 = lerp8(c001, c101, tx);
  const __m256 x11 = lerp8(c011, c111, tx);
  const __m256 y0 = lerp8(x00, x10, ty);
  const __m256 y1 = lerp8(x01, x11, ty);
  return lerp8(y0, y1, tz);
}

void bilateral_rows_avx2(const BilateralArgs& a, int y0, int y1) {
  const int r = a.radius, w = a.width, h = a.height;
  const int side = 2 * r + 1;
  const __m256 zero = _mm256_setzero_ps();
  const __m256 signmask = _mm256_set1_ps(-0.f);
  const __m256 inv2rs = _mm256_set1_ps(a.inv2_range_sigma2);
  for (int y = y0; y < y1; ++y) {
    const float* srow = a.src + static_cast<size_t>(y) * w;
    float* drow = a.dst + static_cast<size_t>(y) * w;
    const int dy_lo = y - r < 0 ? -y : -r;
    const int dy_hi = y + r > h - 1 ? h - 1 - y : r;
    int x = 0;
    for (; x < r && x < w; ++x) drow[x] = detail::bilateral_pixel(a, x, y);
    for (; x + 8 <= w - r; x += 8) {
      const __m256 d0 = _mm256_loadu_ps(srow + x);
      const __m256 valid0 = _mm256_cmp_ps(d0, zero, _CMP_GT_OQ);
      __m256 acc_w = zero, acc_wd = zero;
      for (int dy = dy_lo; dy <= dy_hi; ++dy) {
        const float* nrow = a.src + static_cast<size_t>(y + dy) * w + x;
        const float* lut = a.spatial_lut + static_cast<size_t>(dy + r) * side + r;
        for (int dx = -r; dx <= r; ++dx) {
          const __m256 d = _mm256_loadu_ps(nrow + dx);
          const __m256 dmask = _mm256_cmp_ps(d, zero, _CMP_GT_OQ);
          const __m256 t = _mm256_sub_ps(d, d0);
          const __m256 nt2 = _mm256_xor_ps(_mm256_mul_ps(t, t), signmask);
          const __m256 arg = _mm256_mul_ps(nt2, inv2rs);
          __m256 wgt = _mm256_mul_ps(_mm256_set1_ps(lut[dx]), exp256_ps(arg));
          wgt = _mm256_and_ps(wgt, dmask);
          acc_w = _mm256_add_ps(acc_w, wgt);
          acc_wd = _mm256_fmadd_ps(wgt, d, acc_wd);
        }
      }
      const __m256 res = _mm256_div_ps(acc_wd, acc_w);
      _mm256_storeu_ps(drow + x, _mm256_blendv_ps(zero, res, valid0));
    }
    for (; x < w; ++x) drow[x] = detail::bilateral_pixel(a, x, y);
  }
}

void integrate_planes_avx2(const IntegrateArgs& a, int z0, int z1) {
  const float* M = a.cam_from_vol.m;
  const __m256i iota = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 voxel_v = _mm256_set1_ps(a.voxel);
  const __m256 org0 = _mm256_set1_ps(a.origin[0]);
  const __m256 fx_v = _mm256_set1_ps(a.fx), fy_v = _mm256_set1_ps(a.fy);
  const __m256 cx_v = _mm256_set1_ps(a.cx), cy_v = _mm256_set1_ps(a.cy);
  const __m256i m1 = _mm256_set1_epi32(-1);
  const __m256i imgw_v = _mm256_set1_epi32(a.img_w);
  const __m256i imgh_v = _mm256_set1_epi32(a.img_h);
  const __m256 trunc_v = _mm256_set1_ps(a.trunc);
  const __m256 neg_trunc = _mm256_set1_ps(-a.trunc);
  const __m256d wmax_d = _mm256_set1_pd(a.wmax);
  const __m256 M0 = _mm256_set1_ps(M[0]), M4 = _mm256_set1_ps(M[4]),
               M8 = _mm256_set1_ps(M[8]);
  const int vec_end = a.nx - (a.nx % 8);
  for (int k = z0; k < z1; ++k) {
    for (int j = 0; j < a.ny; ++j) {
      const detail::RowBase3 b = detail::integrate_row_base(a, j, k);
      const __m256 bx = _mm256_set1_ps(b.x), by = _mm256_set1_ps(b.y),
                   bz = _mm256_set1_ps(b.z);
      float* srow = a.sdf + (static_cast<size_t>(k) * a.ny + j) * a.nx;
      float* wrow = a.weight + (static_cast<size_t>(k) * a.ny + j) * a.nx;
      for (int i = 0; i < vec_end; i += 8) {
        const __m256i ivec = _mm256_add_epi32(_mm256_set1_epi32(i), iota);
        const __m256 px =
            _mm256_fmadd_ps(_mm256_cvtepi32_ps(ivec), voxel_v, org0);
        const __m256 xc = _mm256_fmadd_ps(M0, px, bx);
        const __m256 yc = _mm256_fmadd_ps(M4, px, by);
        const __m256 zc = _mm256_fmadd_ps(M8, px, bz);
        const __m256 zmask = _mm256_cmp_ps(zc, zero, _CMP_GT_OQ);
        if (_mm256_testz_ps(zmask, zmask)) continue;
        const __m256 u = _mm256_fmadd_ps(fx_v, _mm256_div_ps(xc, zc), cx_v);
        const __m256 v = _mm256_fmadd_ps(fy_v, _mm256_div_ps(yc, zc), cy_v);
        const __m256i ui = _mm256_cvtps_epi32(u);
        const __m256i vi = _mm256_cvtps_epi32(v);
        __m256i bmask = _mm256_and_si256(_mm256_cmpgt_epi32(ui, m1),
                                         _mm256_cmpgt_epi32(imgw_v, ui));
        bmask = _mm256_and_si256(bmask, _mm256_cmpgt_epi32(vi, m1));
        bmask = _mm256_and_si256(bmask, _mm256_cmpgt_epi32(imgh_v, vi));
        __m256 mask = _mm256_and_ps(zmask, _mm256_castsi256_ps(bmask));
        if (_mm256_testz_ps(mask, mask)) continue;
        const __m256i pix = _mm256_and_si256(
            _mm256_add_epi32(_mm256_mullo_epi32(vi, imgw_v), ui),
            _mm256_castps_si256(mask));
        const __m256 d = _mm256_i32gather_ps(a.depth, pix, 4);
        mask = _mm256_and_ps(mask, _mm256_cmp_ps(d, zero, _CMP_GT_OQ));
        __m256 qv;
        if (a.q) {
          qv = _mm256_i32gather_ps(a.q, pix, 4);
          mask = _mm256_and_ps(mask, _mm256_cmp_ps(qv, zero, _CMP_GT_OQ));
        } else {
          qv = _mm256_set1_ps(1.f);
        }
        const __m256 obs = _mm256_sub_ps(d, zc);
        mask = _mm256_and_ps(mask, _mm256_cmp_ps(obs, neg_trunc, _CMP_GE_OQ));
        if (_mm256_testz_ps(mask, mask)) continue;
        const __m256 psi_obs = _mm256_min_ps(obs, trunc_v);
        const __m256 W8 = _mm256_loadu_ps(wrow + i);
        const __m256 P8 = _mm256_loadu_ps(srow + i);
        __m128 lo, hi;
        __m256d W_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(W8));
        __m256d W_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(W8, 1));
        __m256d P_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(P8));
        __m256d P_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(P8, 1));
        __m256d q_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(qv));
        __m256d q_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(qv, 1));
        __m256d o_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(psi_obs));
        __m256d o_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(psi_obs, 1));
        __m256d Wn_lo = _mm256_add_pd(W_lo, q_lo);
        __m256d Wn_hi = _mm256_add_pd(W_hi, q_hi);
        __m256d Pn_lo = _mm256_div_pd(
            _mm256_add_pd(_mm256_mul_pd(W_lo, P_lo), _mm256_mul_pd(q_lo, o_lo)),
            Wn_lo);
        __m256d Pn_hi = _mm256_div_pd(
            _mm256_add_pd(_mm256_mul_pd(W_hi, P_hi), _mm256_mul_pd(q_hi, o_hi)),
            Wn_hi);
        __m256d Wc_lo = _mm256_min_pd(Wn_lo, wmax_d);
        __m256d Wc_hi = _mm256_min_pd(Wn_hi, wmax_d);
        lo = _mm256_cvtpd_ps(Pn_lo);
        hi = _mm256_cvtpd_ps(Pn_hi);
        const __m256 Pn8 = _mm256_set_m128(hi, lo);
        lo = _mm256_cvtpd_ps(Wc_lo);
        hi = _mm256_cvtpd_ps(Wc_hi);
        const __m256 Wc8 = _mm256_set_m128(hi, lo);
        const __m256i mi = _mm256_castps_si256(mask);
        _mm256_maskstore_ps(srow + i, mi, Pn8);
        _mm256_maskstore_ps(wrow + i, mi, Wc8);
      }
      if (vec_end < a.nx) detail::integrate_span(a, b, j, k, vec_end, a.nx);
    }
  }
}

void likelihood_rows_avx2(const LikelihoodArgs& a, int y0, int y1) {
  const float* M = a.vol_from_cam.m;
  const __m256 zero = _mm256_setzero_ps();
  const __m256 signmask = _mm256_set1_ps(-0.f);
  const __m256i m1 = _mm256_set1_epi32(-1);
  const __m256 cx_v = _mm256_set1_ps(a.cx);
  const __m256 invfx = _mm256_set1_ps(a.inv_fx);
  const __m256 invv = _mm256_set1_ps(a.inv_voxel);
  const __m256 osh0 = _mm256_set1_ps(a.oshift[0]);
  const __m256 osh1 = _mm256_set1_ps(a.oshift[1]);
  const __m256 osh2 = _mm256_set1_ps(a.oshift[2]);
  const __m256i nxe = _mm256_set1_epi32(a.nx - 1);
  const __m256i nye = _mm256_set1_epi32(a.ny - 1);
  const __m256i nze = _mm256_set1_epi32(a.nz - 1);
  const __m256i nx_v = _mm256_set1_epi32(a.nx);
  const __m256i ny_v = _mm256_set1_epi32(a.ny);
  const __m256 amp_v = _mm256_set1_ps(a.amp);
  const __m256 invsig = _mm256_set1_ps(a.inv_sigma);
  const __m256 floor_v = _mm256_set1_ps(a.floor_term);
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 M0 = _mm256_set1_ps(M[0]), M4 = _mm256_set1_ps(M[4]),
               M8 = _mm256_set1_ps(M[8]);
  const __m256 M3 = _mm256_set1_ps(M[3]), M7 = _mm256_set1_ps(M[7]),
               M11 = _mm256_set1_ps(M[11]);
  const int plane = a.nx * a.ny;
  const __m256 xiota = _mm256_setr_ps(0, 1, 2, 3, 4, 5, 6, 7);
  const int vec_end = a.img_w - (a.img_w % 8);
  for (int y = y0; y < y1; ++y) {
    const detail::RowBase3 b = detail::likelihood_row_base(a, y);
    const __m256 bx = _mm256_set1_ps(b.x), by = _mm256_set1_ps(b.y),
                 bz = _mm256_set1_ps(b.z);
    const float* drow = a.depth + static_cast<size_t>(y) * a.img_w;
    float* orow = a.out + static_cast<size_t>(y) * a.img_w;
    for (int x = 0; x < vec_end; x += 8) {
      const __m256 d = _mm256_loadu_ps(drow + x);
      __m256 mask = _mm256_cmp_ps(d, zero, _CMP_GT_OQ);
      if (_mm256_testz_ps(mask, mask)) {
        _mm256_storeu_ps(orow + x, zero);
        continue;
      }
      const __m256 xv = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(x)), xiota);
      const __m256 dirx = _mm256_mul_ps(_mm256_sub_ps(xv, cx_v), invfx);
      const __m256 rdx = _mm256_fmadd_ps(M0, dirx, bx);
      const __m256 rdy = _mm256_fmadd_ps(M4, dirx, by);
      const __m256 rdz = _mm256_fmadd_ps(M8, dirx, bz);
      const __m256 mx = _mm256_fmadd_ps(d, rdx, M3);
      const __m256 my = _mm256_fmadd_ps(d, rdy, M7);
      const __m256 mz = _mm256_fmadd_ps(d, rdz, M11);
      const __m256 gx = _mm256_fmadd_ps(mx, invv, osh0);
      const __m256 gy = _mm256_fmadd_ps(my, invv, osh1);
      const __m256 gz = _mm256_fmadd_ps(mz, invv, osh2);
      const __m256 fx_ = _mm256_floor_ps(gx);
      const __m256 fy_ = _mm256_floor_ps(gy);
      const __m256 fz_ = _mm256_floor_ps(gz);
      const __m256i i0 = _mm256_cvttps_epi32(fx_);
      const __m256i j0 = _mm256_cvttps_epi32(fy_);
      const __m256i k0 = _mm256_cvttps_epi32(fz_);
      __m256i bm = _mm256_and_si256(_mm256_cmpgt_epi32(i0, m1),
                                    _mm256_cmpgt_epi32(nxe, i0));
      bm = _mm256_and_si256(bm, _mm256_and_si256(_mm256_cmpgt_epi32(j0, m1),
                                                 _mm256_cmpgt_epi32(nye, j0)));
      bm = _mm256_and_si256(bm, _mm256_and_si256(_mm256_cmpgt_epi32(k0, m1),
                                                 _mm256_cmpgt_epi32(nze, k0)));
      mask = _mm256_and_ps(mask, _mm256_castsi256_ps(bm));
      if (_mm256_testz_ps(mask, mask)) {
        _mm256_storeu_ps(orow + x, zero);
        continue;
      }
      const __m256 tx = _mm256_sub_ps(gx, fx_);
      const __m256 ty = _mm256_sub_ps(gy, fy_);
      const __m256 tz = _mm256_sub_ps(gz, fz_);
      const __m256i base = _mm256_and_si256(
          _mm256_add_epi32(
              _mm256_mullo_epi32(
                  _mm256_add_epi32(_mm256_mullo_epi32(k0, ny_v), j0), nx_v),
              i0),
          _mm256_castps_si256(mask));
      const __m256 psi = trilerp8(a.sdf, base, 1, a.nx, plane, tx, ty, tz);
      __m256 pfg = half;
      if (a.fg) {
        const __m256 F = trilerp8(a.fg, base, 1, a.nx, plane, tx, ty, tz);
        const __m256 B = trilerp8(a.bg, base, 1, a.nx, plane, tx, ty, tz);
        const __m256 s = _mm256_add_ps(F, B);
        const __m256 sm = _mm256_cmp_ps(s, zero, _CMP_GT_OQ);
        pfg = _mm256_blendv_ps(half, _mm256_div_ps(F, s), sm);
      }
      const __m256 t = _mm256_mul_ps(_mm256_andnot_ps(signmask, psi), invsig);
      const __m256 e = exp256_ps(_mm256_xor_ps(t, signmask));
      const __m256 lap = _mm256_mul_ps(amp_v, e);
      const __m256 res = _mm256_fmadd_ps(lap, pfg, floor_v);
      _mm256_storeu_ps(orow + x, _mm256_and_ps(res, mask));
    }
    for (int x = vec_end; x < a.img_w; ++x) {
      orow[x] = detail::likelihood_pixel(a, b, x, drow[x]);
    }
  }
}

}  // namespace

const Table* avx2_table() {
  if (!avx2_supported()) return nullptr;
  static const Table t{bilateral_rows_avx2, integrate_planes_avx2,
                       likelihood_rows_avx2, "avx2"};
  return &t;
}

}  // namespace mvf::kernels
