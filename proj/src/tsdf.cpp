#include "mvf/tsdf.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "mvf/parallel.hpp"

namespace mvf {

double aabb_iou(const Aabb& a, const Aabb& b) {
  const double inter = a.intersection(b).volume();
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Aabb aabb_transformed(const Aabb& box, const Pose& pose) {
  Aabb out;
  out.min = Vec3::Constant(std::numeric_limits<double>::infinity());
  out.max = -out.min;
  for (int c = 0; c < 8; ++c) {
    Vec3 p(c & 1 ? box.max.x() : box.min.x(), c & 2 ? box.max.y() : box.min.y(),
           c & 4 ? box.max.z() : box.min.z());
    Vec3 q = pose * p;
    out.min = out.min.cwiseMin(q);
    out.max = out.max.cwiseMax(q);
  }
  return out;
}

kernels::Mat34f to_mat34f(const Pose& pose) {
  kernels::Mat34f m;
  const Mat3& R = pose.rotation();
  const Vec3& t = pose.translation();
  for (int r = 0; r < 3; ++r) {
    m.m[r * 4 + 0] = static_cast<float>(R(r, 0));
    m.m[r * 4 + 1] = static_cast<float>(R(r, 1));
    m.m[r * 4 + 2] = static_cast<float>(R(r, 2));
    m.m[r * 4 + 3] = static_cast<float>(t(r));
  }
  return m;
}

TsdfVolume::TsdfVolume(const Vec3& center, const Eigen::Vector3i& resolution,
                       double voxel_size, double weight_cap, double truncation)
    : center_(center),
      res_(resolution),
      voxel_(voxel_size),
      trunc_(truncation > 0 ? truncation : 10.0 * voxel_size),
      wmax_(static_cast<float>(weight_cap)) {
  if (!(voxel_size > 0)) throw std::invalid_argument("voxel_size must be > 0");
  if (!(weight_cap > 0)) throw std::invalid_argument("weight_cap must be > 0");
  if (res_.minCoeff() < 2) throw std::invalid_argument("resolution must be >= 2 per axis");
  const long long n =
      static_cast<long long>(res_.x()) * res_.y() * res_.z();
  if (n > (1LL << 31) - 1) throw std::invalid_argument("volume too large");
  sdf_.assign(static_cast<size_t>(n), static_cast<float>(trunc_));
  weight_.assign(static_cast<size_t>(n), 0.f);
}

Vec3 TsdfVolume::origin() const {
  return center_ - 0.5 * voxel_ * res_.cast<double>() + 0.5 * Vec3::Constant(voxel_);
}

Aabb TsdfVolume::local_aabb() const {
  const Vec3 half = 0.5 * voxel_ * res_.cast<double>();
  return {center_ - half, center_ + half};
}

Vec3 TsdfVolume::voxel_center(int i, int j, int k) const {
  return origin() + voxel_ * Vec3(i, j, k);
}

void TsdfVolume::ensure_counts() {
  if (fg_.empty()) {
    fg_.assign(sdf_.size(), 0.f);
    bg_.assign(sdf_.size(), 0.f);
  }
}

namespace {
struct TrilinearCell {
  size_t base;
  double tx, ty, tz;
};

bool locate(const Vec3& p, const Vec3& origin, double voxel,
            const Eigen::Vector3i& res, TrilinearCell* cell) {
  const Vec3 g = (p - origin) / voxel;
  const double fx = std::floor(g.x()), fy = std::floor(g.y()), fz = std::floor(g.z());
  const int i0 = static_cast<int>(fx), j0 = static_cast<int>(fy),
            k0 = static_cast<int>(fz);
  if (i0 < 0 || j0 < 0 || k0 < 0 || i0 >= res.x() - 1 || j0 >= res.y() - 1 ||
      k0 >= res.z() - 1) {
    return false;
  }
  cell->base = (static_cast<size_t>(k0) * res.y() + j0) * res.x() + i0;
  cell->tx = g.x() - fx;
  cell->ty = g.y() - fy;
  cell->tz = g.z() - fz;
  return true;
}

double trilerp_cell(const float* g, const TrilinearCell& c, size_t sx, size_t sy,
                    size_t sz) {
  const double c000 = g[c.base], c100 = g[c.base + sx];
  const double c010 = g[c.base + sy], c110 = g[c.base + sy + sx];
  const double c001 = g[c.base + sz], c101 = g[c.base + sz + sx];
  const double c011 = g[c.base + sz + sy], c111 = g[c.base + sz + sy + sx];
  const double x00 = c000 + c.tx * (c100 - c000);
  const double x10 = c010 + c.tx * (c110 - c010);
  const double x01 = c001 + c.tx * (c101 - c001);
  const double x11 = c011 + c.tx * (c111 - c011);
  const double y0 = x00 + c.ty * (x10 - x00);
  const double y1 = x01 + c.ty * (x11 - x01);
  return y0 + c.tz * (y1 - y0);
}
}  // namespace

bool TsdfVolume::contains(const Vec3& p) const {
  TrilinearCell c;
  return locate(p, origin(), voxel_, res_, &c);
}

std::optional<double> TsdfVolume::interpolate_sdf(const Vec3& p) const {
  TrilinearCell c;
  if (!locate(p, origin(), voxel_, res_, &c)) return std::nullopt;
  return trilerp_cell(sdf_.data(), c, 1, res_.x(),
                      static_cast<size_t>(res_.x()) * res_.y());
}

std::optional<double> TsdfVolume::interpolate_weight(const Vec3& p) const {
  TrilinearCell c;
  if (!locate(p, origin(), voxel_, res_, &c)) return std::nullopt;
  return trilerp_cell(weight_.data(), c, 1, res_.x(),
                      static_cast<size_t>(res_.x()) * res_.y());
}

double TsdfVolume::foreground_prob(const Vec3& p) const {
  if (fg_.empty()) return 0.5;
  TrilinearCell c;
  if (!locate(p, origin(), voxel_, res_, &c)) return 0.5;
  const size_t sy = res_.x(), sz = static_cast<size_t>(res_.x()) * res_.y();
  const double F = trilerp_cell(fg_.data(), c, 1, sy, sz);
  const double B = trilerp_cell(bg_.data(), c, 1, sy, sz);
  const double s = F + B;
  return s > 0 ? F / s : 0.5;
}

std::optional<Vec3> TsdfVolume::sdf_gradient(const Vec3& p) const {
  double v;
  Vec3 g;
  if (!sample(p, &v, &g, nullptr)) return std::nullopt;
  return g;
}

bool TsdfVolume::sample(const Vec3& p, double* sdf, Vec3* grad,
                        double* weight) const {
  TrilinearCell c;
  if (!locate(p, origin(), voxel_, res_, &c)) return false;
  const size_t sx = 1, sy = res_.x(),
               sz = static_cast<size_t>(res_.x()) * res_.y();
  const float* g = sdf_.data();
  const double c000 = g[c.base], c100 = g[c.base + sx];
  const double c010 = g[c.base + sy], c110 = g[c.base + sy + sx];
  const double c001 = g[c.base + sz], c101 = g[c.base + sz + sx];
  const double c011 = g[c.base + sz + sy], c111 = g[c.base + sz + sy + sx];
  const double tx = c.tx, ty = c.ty, tz = c.tz;
  if (sdf || grad) {
    const double x00 = c000 + tx * (c100 - c000);
    const double x10 = c010 + tx * (c110 - c010);
    const double x01 = c001 + tx * (c101 - c001);
    const double x11 = c011 + tx * (c111 - c011);
    const double y0 = x00 + ty * (x10 - x00);
    const double y1 = x01 + ty * (x11 - x01);
    if (sdf) *sdf = y0 + tz * (y1 - y0);
    if (grad) {
      const double inv = 1.0 / voxel_;
      const double gx = ((c100 - c000) * (1 - ty) * (1 - tz) +
                         (c110 - c010) * ty * (1 - tz) +
                         (c101 - c001) * (1 - ty) * tz + (c111 - c011) * ty * tz) *
                        inv;
      const double gy =
          ((x10 - x00) * (1 - tz) + (x11 - x01) * tz) * inv;
      const double gz = (y1 - y0) * inv;
      (*grad) = Vec3(gx, gy, gz);
    }
  }
  if (weight) {
    // conservative support: the smallest corner weight, so a cell touching
    // any unobserved voxel reads 0 and the caller can reject the sample
    // (the sdf blend above is contaminated by the +truncation default there)
    const float* wg = weight_.data();
    double mn = wg[c.base];
    mn = std::min(mn, double(wg[c.base + sx]));
    mn = std::min(mn, double(wg[c.base + sy]));
    mn = std::min(mn, double(wg[c.base + sy + sx]));
    mn = std::min(mn, double(wg[c.base + sz]));
    mn = std::min(mn, double(wg[c.base + sz + sx]));
    mn = std::min(mn, double(wg[c.base + sz + sy]));
    mn = std::min(mn, double(wg[c.base + sz + sy + sx]));
    *weight = mn;
  }
  return true;
}

void TsdfVolume::integrate_depth(const Image<float>& depth, const Intrinsics& k,
                                 const Pose& vol_from_cam,
                                 const Image<float>* assoc_q, ThreadPool* pool) {
  if (!k.valid() || !depth.same_size(k.width, k.height)) {
    throw std::invalid_argument("integrate_depth: depth/intrinsics mismatch");
  }
  if (assoc_q && !assoc_q->same_size(k.width, k.height)) {
    throw std::invalid_argument("integrate_depth: assoc size mismatch");
  }
  kernels::IntegrateArgs a;
  a.sdf = sdf_.data();
  a.weight = weight_.data();
  a.nx = res_.x();
  a.ny = res_.y();
  a.nz = res_.z();
  const Vec3 o = origin();
  a.origin[0] = static_cast<float>(o.x());
  a.origin[1] = static_cast<float>(o.y());
  a.origin[2] = static_cast<float>(o.z());
  a.voxel = static_cast<float>(voxel_);
  a.cam_from_vol = to_mat34f(vol_from_cam.inverse());
  a.fx = static_cast<float>(k.fx);
  a.fy = static_cast<float>(k.fy);
  a.cx = static_cast<float>(k.cx);
  a.cy = static_cast<float>(k.cy);
  a.img_w = k.width;
  a.img_h = k.height;
  a.depth = depth.data();
  a.q = assoc_q ? assoc_q->data() : nullptr;
  a.trunc = static_cast<float>(trunc_);
  a.wmax = wmax_;
  const kernels::Table& t = kernels::active();
  for_chunks(pool, 0, res_.z(), 4,
             [&](int z0, int z1) { t.integrate_planes(a, z0, z1); });
}

void TsdfVolume::integrate_counts(const Image<uint8_t>& fg_mask,
                                  const Image<uint8_t>& eligible,
                                  const Intrinsics& k, const Pose& vol_from_cam,
                                  ThreadPool* pool) {
  if (!k.valid() || !fg_mask.same_size(k.width, k.height) ||
      !eligible.same_size(k.width, k.height)) {
    throw std::invalid_argument("integrate_counts: size mismatch");
  }
  ensure_counts();
  const Pose cam_from_vol = vol_from_cam.inverse();
  const Mat3 R = cam_from_vol.rotation();
  const Vec3 t = cam_from_vol.translation();
  const Vec3 o = origin();
  for_chunks(pool, 0, res_.z(), 4, [&](int z0, int z1) {
    for (int kk = z0; kk < z1; ++kk) {
      for (int j = 0; j < res_.y(); ++j) {
        const Vec3 base =
            R.col(1) * (o.y() + voxel_ * j) + R.col(2) * (o.z() + voxel_ * kk) + t;
        float* frow = fg_.data() + index(0, j, kk);
        float* brow = bg_.data() + index(0, j, kk);
        for (int i = 0; i < res_.x(); ++i) {
          const Vec3 p = R.col(0) * (o.x() + voxel_ * i) + base;
          if (!(p.z() > 0)) continue;
          const int u = static_cast<int>(std::lround(k.fx * p.x() / p.z() + k.cx));
          const int v = static_cast<int>(std::lround(k.fy * p.y() / p.z() + k.cy));
          if (u < 0 || u >= k.width || v < 0 || v >= k.height) continue;
          if (!eligible.at(u, v)) continue;
          if (fg_mask.at(u, v)) {
            frow[i] += 1.f;
          } else {
            brow[i] += 1.f;
          }
        }
      }
    }
  });
}

TsdfVolume TsdfVolume::resized(const Eigen::Vector3i& new_res,
                               const Vec3& new_center) const {
  TsdfVolume out(new_center, new_res, voxel_, wmax_, trunc_);
  const Vec3 shift = (out.origin() - origin()) / voxel_;
  Eigen::Vector3i d;
  for (int a = 0; a < 3; ++a) {
    d[a] = static_cast<int>(std::lround(shift[a]));
    if (std::abs(shift[a] - d[a]) > 1e-6) {
      throw std::invalid_argument("resized: center shift not voxel-aligned");
    }
  }
  const bool counts = has_counts();
  if (counts) out.ensure_counts();
  for (int k = 0; k < new_res.z(); ++k) {
    const int ok = k + d.z();
    if (ok < 0 || ok >= res_.z()) continue;
    for (int j = 0; j < new_res.y(); ++j) {
      const int oj = j + d.y();
      if (oj < 0 || oj >= res_.y()) continue;
      const int i_lo = std::max(0, -d.x());
      const int i_hi = std::min(new_res.x(), res_.x() - d.x());
      if (i_lo >= i_hi) continue;
      const size_t src = index(i_lo + d.x(), oj, ok);
      const size_t dst = out.index(i_lo, j, k);
      const size_t n = static_cast<size_t>(i_hi - i_lo);
      std::memcpy(out.sdf_.data() + dst, sdf_.data() + src, n * sizeof(float));
      std::memcpy(out.weight_.data() + dst, weight_.data() + src,
                  n * sizeof(float));
      if (counts) {
        std::memcpy(out.fg_.data() + dst, fg_.data() + src, n * sizeof(float));
        std::memcpy(out.bg_.data() + dst, bg_.data() + src, n * sizeof(float));
      }
    }
  }
  return out;
}

bool TsdfVolume::resize_to_fit(const Aabb& box_local, int pad_voxels) {
  const Aabb cur = local_aabb();
  Aabb need = box_local;
  need.min -= Vec3::Constant(pad_voxels * voxel_);
  need.max += Vec3::Constant(pad_voxels * voxel_);
  if ((need.min.array() >= cur.min.array()).all() &&
      (need.max.array() <= cur.max.array()).all()) {
    return false;
  }
  const Aabb target = cur.united(need);
  Eigen::Vector3i new_res;
  Vec3 new_center;
  for (int a = 0; a < 3; ++a) {
    const double ext = target.max[a] - target.min[a];
    int r = static_cast<int>(std::ceil(ext / voxel_));
    r = std::max(((r + 31) / 32) * 32, res_[a]);
    // Center stays on the old voxel lattice; grow r until some lattice point
    // covers the target (at most one extra 32-step).
    const double want = 0.5 * (target.min[a] + target.max[a]);
    for (;; r += 32) {
      const double half = 0.5 * r * voxel_;
      const double m_lo = std::ceil((target.max[a] - center_[a] - half) / voxel_ - 1e-9);
      const double m_hi = std::floor((target.min[a] - center_[a] + half) / voxel_ + 1e-9);
      if (m_lo <= m_hi) {
        double m = std::round((want - center_[a]) / voxel_);
        m = std::clamp(m, m_lo, m_hi);
        new_res[a] = r;
        new_center[a] = center_[a] + voxel_ * m;
        break;
      }
    }
  }
  *this = resized(new_res, new_center);
  return true;
}

void TsdfVolume::save(std::ostream& os) const {
  const char magic[4] = {'M', 'V', 'F', 'V'};
  os.write(magic, 4);
  const uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), 4);
  int32_t res[3] = {res_.x(), res_.y(), res_.z()};
  os.write(reinterpret_cast<const char*>(res), sizeof(res));
  double geo[8] = {voxel_,       trunc_,      wmax_,       center_.x(),
                   center_.y(),  center_.z(), 0.0,         0.0};
  os.write(reinterpret_cast<const char*>(geo), sizeof(geo));
  const uint32_t flags = has_counts() ? 1u : 0u;
  os.write(reinterpret_cast<const char*>(&flags), 4);
  os.write(reinterpret_cast<const char*>(sdf_.data()), sdf_.size() * 4);
  os.write(reinterpret_cast<const char*>(weight_.data()), weight_.size() * 4);
  if (has_counts()) {
    os.write(reinterpret_cast<const char*>(fg_.data()), fg_.size() * 4);
    os.write(reinterpret_cast<const char*>(bg_.data()), bg_.size() * 4);
  }
}

TsdfVolume TsdfVolume::load(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "MVFV", 4) != 0) {
    throw IoError("volume snapshot: bad magic");
  }
  uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw IoError("volume snapshot: unsupported version");
  int32_t res[3];
  is.read(reinterpret_cast<char*>(res), sizeof(res));
  double geo[8];
  is.read(reinterpret_cast<char*>(geo), sizeof(geo));
  uint32_t flags = 0;
  is.read(reinterpret_cast<char*>(&flags), 4);
  TsdfVolume v(Vec3(geo[3], geo[4], geo[5]), Eigen::Vector3i(res[0], res[1], res[2]),
               geo[0], geo[2], geo[1]);
  is.read(reinterpret_cast<char*>(v.sdf_.data()), v.sdf_.size() * 4);
  is.read(reinterpret_cast<char*>(v.weight_.data()), v.weight_.size() * 4);
  if (flags & 1) {
    v.ensure_counts();
    is.read(reinterpret_cast<char*>(v.fg_.data()), v.fg_.size() * 4);
    is.read(reinterpret_cast<char*>(v.bg_.data()), v.bg_.size() * 4);
  }
  if (!is) throw IoError("volume snapshot: truncated file");
  return v;
}

}  // namespace mvf
