#pragma once

// RoI-Align over a d_p x d_p feature grid, expressed as a constant weight row
// so pooling many boxes is one matrix product with the flattened grid.

#include "hoiprompt/tensor.hpp"
#include "hoiprompt/world.hpp"

namespace hoi {

inline constexpr int kRoiSamples = 3;

/// 1 x (grid*grid) weights: mean of bilinear samples at the 3x3 bin centres
/// of `box`. Feature (i, j) sits at (j + 0.5, i + 0.5); samples are clamped
/// to the outer cell centres. Throws DimensionError for degenerate boxes.
RowVector<double> roi_weights(const Box& box, int grid);

/// Stacks roi_weights for each box.
template <typename S>
Matrix<S> roi_matrix(const std::vector<Box>& boxes, int grid) {
  Matrix<S> m(static_cast<Index>(boxes.size()), static_cast<Index>(grid) * grid);
  for (std::size_t i = 0; i < boxes.size(); ++i) m.row(static_cast<Index>(i)) = roi_weights(boxes[i], grid).cast<S>();
  return m;
}

/// Smallest box containing both.
inline Box union_box(const Box& a, const Box& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

}  // namespace hoi
