#include "hoiprompt/roi.hpp"

#include <algorithm>
#include <cmath>

namespace hoi {

RowVector<double> roi_weights(const Box& box, int grid) {
  if (!(box.width() > 0) || !(box.height() > 0)) {
    throw DimensionError("roi_weights: degenerate box (" + std::to_string(box.x1) + ", " + std::to_string(box.y1) + ", " +
                         std::to_string(box.x2) + ", " + std::to_string(box.y2) + ")");
  }
  RowVector<double> w = RowVector<double>::Zero(static_cast<Index>(grid) * grid);
  const double share = 1.0 / (kRoiSamples * kRoiSamples);
  const double hi = grid - 1;
  for (int sy = 0; sy < kRoiSamples; ++sy) {
    const double gy = std::clamp(box.y1 + (sy + 0.5) * box.height() / kRoiSamples - 0.5, 0.0, hi);
    const int y0 = static_cast<int>(std::floor(gy));
    const int y1 = std::min(y0 + 1, grid - 1);
    const double fy = gy - y0;
    for (int sx = 0; sx < kRoiSamples; ++sx) {
      const double gx = std::clamp(box.x1 + (sx + 0.5) * box.width() / kRoiSamples - 0.5, 0.0, hi);
      const int x0 = static_cast<int>(std::floor(gx));
      const int x1 = std::min(x0 + 1, grid - 1);
      const double fx = gx - x0;
      w(y0 * grid + x0) += share * (1 - fy) * (1 - fx);
      w(y0 * grid + x1) += share * (1 - fy) * fx;
      w(y1 * grid + x0) += share * fy * (1 - fx);
      w(y1 * grid + x1) += share * fy * fx;
    }
  }
  return w;
}

}  // namespace hoi
