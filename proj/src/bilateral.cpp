#include <cmath>
#include <stdexcept>
#include <vector>

#include "mvf/geometry.hpp"
#include "mvf/kernels.hpp"
#include "mvf/parallel.hpp"

namespace mvf {

Image<float> bilateral_filter(const Image<float>& depth, double spatial_sigma,
                              double range_sigma, int radius, ThreadPool* pool) {
  if (depth.empty()) return {};
  if (!(spatial_sigma > 0) || !(range_sigma > 0) || radius < 1) {
    throw std::invalid_argument("bilateral_filter: sigmas must be > 0, radius >= 1");
  }
  const int side = 2 * radius + 1;
  std::vector<float> lut(static_cast<size_t>(side) * side);
  const double inv2ss = 1.0 / (2.0 * spatial_sigma * spatial_sigma);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      lut[static_cast<size_t>(dy + radius) * side + (dx + radius)] =
          static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv2ss));
    }
  }

  Image<float> out(depth.width(), depth.height());
  kernels::BilateralArgs args;
  args.src = depth.data();
  args.dst = out.data();
  args.width = depth.width();
  args.height = depth.height();
  args.radius = radius;
  args.spatial_lut = lut.data();
  args.inv2_range_sigma2 =
      static_cast<float>(1.0 / (2.0 * range_sigma * range_sigma));
  const kernels::Table& t = kernels::active();
  for_chunks(pool, 0, depth.height(), 16,
             [&](int y0, int y1) { t.bilateral_rows(args, y0, y1); });
  return out;
}

}  // namespace mvf
