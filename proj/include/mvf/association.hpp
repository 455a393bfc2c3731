#pragma once

#include <vector>

#include "mvf/geometry.hpp"
#include "mvf/image.hpp"
#include "mvf/tsdf.hpp"

namespace mvf {

class ThreadPool;

struct LikelihoodParams {
  double sigma = 0.02;
  double alpha = 0.8;
  double uniform_density = 1.0;
};

struct ModelView {
  int id = 0;
  const TsdfVolume* volume = nullptr;
  Pose vol_from_cam;  // camera-to-model transform xi_i
};

// Per-pixel association posteriors q(c|u), one plane per model, normalized
// over the models whose likelihood at the pixel is positive. Pixels with no
// valid depth or outside every volume have all-zero planes and valid = 0.
struct AssociationField {
  int width = 0, height = 0;
  std::vector<int> model_ids;
  std::vector<Image<float>> q;
  Image<uint8_t> valid;

  int slot(int model_id) const {
    for (size_t i = 0; i < model_ids.size(); ++i) {
      if (model_ids[i] == model_id) return static_cast<int>(i);
    }
    return -1;
  }
  const Image<float>& plane(int model_id) const {
    const int s = slot(model_id);
    if (s < 0) throw std::invalid_argument("association: unknown model id");
    return q[s];
  }
};

// Measurement density for one pixel against one model: a Laplace term
// on the interpolated sdf scaled by the foreground probability, plus the
// uniform floor; zero outside the volume.
double data_likelihood(const TsdfVolume& vol, const Pose& vol_from_cam,
                       const Vec2& pixel, double depth, const Intrinsics& k,
                       const LikelihoodParams& p);

// E-step: likelihood plane per model (SIMD kernels), then per-pixel
// normalization q(c|u) = p(u|c) / sum_c' p(u|c').
AssociationField compute_association(const Image<float>& depth,
                                     const Intrinsics& k,
                                     const std::vector<ModelView>& models,
                                     const LikelihoodParams& p,
                                     ThreadPool* pool = nullptr);

}  // namespace mvf
