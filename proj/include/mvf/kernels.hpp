#pragma once

#include <cstdint>

namespace mvf::kernels {

// Row-major 3x4 rigid transform, rotation in m[0..8], translation in m[9..11]
// laid out as rows: [r00 r01 r02 t0; r10 r11 r12 t1; r20 r21 r22 t2].
struct Mat34f {
  float m[12];
};

struct BilateralArgs {
  const float* src = nullptr;
  float* dst = nullptr;
  int width = 0, height = 0;
  int radius = 0;
  const float* spatial_lut = nullptr;  // (2r+1)^2, row-major over (dy,dx)
  float inv2_range_sigma2 = 0;
};

struct IntegrateArgs {
  float* sdf = nullptr;
  float* weight = nullptr;
  int nx = 0, ny = 0, nz = 0;
  float origin[3] = {0, 0, 0};  // model-frame position of voxel (0,0,0) center
  float voxel = 0;
  Mat34f cam_from_vol{};
  float fx = 0, fy = 0, cx = 0, cy = 0;
  int img_w = 0, img_h = 0;
  const float* depth = nullptr;
  const float* q = nullptr;  // association weights, null = 1 everywhere
  float trunc = 0;
  float wmax = 0;
};

struct LikelihoodArgs {
  const float* depth = nullptr;
  int img_w = 0, img_h = 0;
  Mat34f vol_from_cam{};
  const float* sdf = nullptr;
  const float* fg = nullptr;  // null = no counts, p_fg = 0.5
  const float* bg = nullptr;
  int nx = 0, ny = 0, nz = 0;
  float oshift[3] = {0, 0, 0};  // -origin/voxel, folded grid-coordinate offset
  float inv_voxel = 0;
  float inv_fx = 0, inv_fy = 0, cx = 0, cy = 0;
  float amp = 0;        // alpha / (2 sigma)
  float inv_sigma = 0;  // 1 / sigma
  float floor_term = 0; // (1 - alpha) * uniform_density
  float* out = nullptr; // likelihood, 0 where depth invalid or point outside volume
};

struct Table {
  void (*bilateral_rows)(const BilateralArgs&, int y0, int y1);
  void (*integrate_planes)(const IntegrateArgs&, int z0, int z1);
  void (*likelihood_rows)(const LikelihoodArgs&, int y0, int y1);
  const char* name;
};

enum class Backend { Auto, Scalar, Avx2 };

bool avx2_supported();
// Throws std::invalid_argument if the backend is not available on this build/CPU.
void set_backend(Backend b);
Backend requested_backend();
const Table& active();
const Table& scalar_table();
const Table* avx2_table();  // null when not built or not supported

Backend backend_from_name(const char* name);  // "auto" | "scalar" | "avx2"
const char* backend_name(Backend b);

}  // namespace mvf::kernels
