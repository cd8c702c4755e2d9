#include "casr/morphology.hpp"

namespace casr {

StructuringElement cross_element() { return {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}}; }

StructuringElement square_element(int radius) {
  StructuringElement se;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) se.emplace_back(dy, dx);
  return se;
}

StructuringElement disk_element(int radius) {
  StructuringElement se;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) se.emplace_back(dy, dx);
  return se;
}

namespace {

template <bool Dilate>
BinaryMask morph(const BinaryMask& mask, const StructuringElement& se) {
  const auto h = mask.rows();
  const auto w = mask.cols();
  BinaryMask out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      bool acc = !Dilate;
      for (const auto& [dy, dx] : se) {
        const auto yy = y + dy;
        const auto xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        if constexpr (Dilate) {
          if (mask(yy, xx)) { acc = true; break; }
        } else {
          if (!mask(yy, xx)) { acc = false; break; }
        }
      }
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) { return morph<true>(mask, se); }
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) { return morph<false>(mask, se); }

}  // namespace casr
