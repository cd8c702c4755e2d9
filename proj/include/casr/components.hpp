#pragma once

#include <cstdint>
#include <vector>

#include "casr/image.hpp"

namespace casr {

struct BoundingBox {
  Eigen::Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
};

/// Connected-component labeling result. Label 0 is background; component
/// k (1-based) is stored at index k - 1 of `areas` and `boxes`. Labels are
/// assigned in row-major order of each component's first pixel.
struct ComponentSet {
  Plane<std::int32_t> labels;
  std::vector<std::int64_t> areas;
  std::vector<BoundingBox> boxes;

  int count() const { return static_cast<int>(areas.size()); }
};

ComponentSet connected_components(const BinaryMask& mask, int connectivity = 8);

inline int count_components(const BinaryMask& mask, int connectivity = 8) {
  return connected_components(mask, connectivity).count();
}

}  // namespace casr
