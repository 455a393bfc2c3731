#include "kernels_impl.hpp"
#include "mvf/kernels.hpp"

namespace mvf::kernels {
namespace {

void bilateral_rows_scalar(const BilateralArgs& a, int y0, int y1) {
  for (int y = y0; y < y1; ++y) {
    float* drow = a.dst + static_cast<size_t>(y) * a.width;
    for (int x = 0; x < a.width; ++x) {
      drow[x] = detail::bilateral_pixel(a, x, y);
    }
  }
}

void integrate_planes_scalar(const IntegrateArgs& a, int z0, int z1) {
  for (int k = z0; k < z1; ++k) {
    for (int j = 0; j < a.ny; ++j) {
      const detail::RowBase3 b = detail::integrate_row_base(a, j, k);
      detail::integrate_span(a, b, j, k, 0, a.nx);
    }
  }
}

void likelihood_rows_scalar(const LikelihoodArgs& a, int y0, int y1) {
  for (int y = y0; y < y1; ++y) {
    const detail::RowBase3 b = detail::likelihood_row_base(a, y);
    const float* drow = a.depth + static_cast<size_t>(y) * a.img_w;
    float* orow = a.out + static_cast<size_t>(y) * a.img_w;
    for (int x = 0; x < a.img_w; ++x) {
      orow[x] = detail::likelihood_pixel(a, b, x, drow[x]);
    }
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table t{bilateral_rows_scalar, integrate_planes_scalar,
                       likelihood_rows_scalar, "scalar"};
  return t;
}

}  // namespace mvf::kernels
