#include "casr/augment.hpp"

#include <cmath>
#include <numbers>

#include "casr/error.hpp"

namespace casr {

using Eigen::Index;

AugmentSpec AugmentSpec::defaults() {
  AugmentSpec spec;
  for (double a : {5.0, 10.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0}) {
    spec.angles.push_back(a);
    spec.angles.push_back(-a);
  }
  for (double f : {0.05, 0.10})
    for (double sy : {1.0, -1.0})
      for (double sx : {1.0, -1.0}) spec.translations.push_back({sy * f, sx * f});
  spec.include_original = true;
  return spec;
}

void AugmentSpec::validate() const {
  for (double a : angles) require(std::isfinite(a), "augment: angles must be finite");
  for (const auto& t : translations)
    require(std::abs(t.dy) < 1.0 && std::abs(t.dx) < 1.0, "augment: translation fractions must lie in (-1, 1)");
}

namespace {

// Source coordinate of output pixel (x, y) under a counterclockwise rotation
// (y axis pointing down). Near-integer results are snapped so right angles
// map the grid onto itself exactly.
struct InverseRotation {
  double cx, cy, c, s;

  InverseRotation(Index w, Index h, double degrees)
      : cx((w - 1) / 2.0), cy((h - 1) / 2.0), c(std::cos(degrees * std::numbers::pi / 180.0)),
        s(std::sin(degrees * std::numbers::pi / 180.0)) {}

  static double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
  }

  std::pair<double, double> operator()(Index x, Index y) const {
    const double dx = x - cx, dy = y - cy;
    return {snap(cx + c * dx - s * dy), snap(cy + s * dx + c * dy)};
  }
};

}  // namespace

GrayImage rotate_image(const GrayImage& img, double degrees, std::uint8_t fill) {
  const InverseRotation inv(img.cols(), img.rows(), degrees);
  FloatImage out(img.rows(), img.cols());
  for (Index y = 0; y < img.rows(); ++y)
    for (Index x = 0; x < img.cols(); ++x) {
      const auto [sx, sy] = inv(x, y);
      const double fx = std::floor(sx), fy = std::floor(sy);
      const Index x0 = static_cast<Index>(fx), y0 = static_cast<Index>(fy);
      const double wx = sx - fx, wy = sy - fy;
      double acc = 0.0;
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          const double w = (i ? wx : 1 - wx) * (j ? wy : 1 - wy);
          if (w == 0.0) continue;
          const Index xx = x0 + i, yy = y0 + j;
          const bool inside = xx >= 0 && yy >= 0 && xx < img.cols() && yy < img.rows();
          acc += w * (inside ? img(yy, xx) : fill);
        }
      out(y, x) = acc;
    }
  return quantize(out);
}

BinaryMask rotate_mask(const BinaryMask& mask, double degrees) {
  const InverseRotation inv(mask.cols(), mask.rows(), degrees);
  BinaryMask out = BinaryMask::Zero(mask.rows(), mask.cols());
  for (Index y = 0; y < mask.rows(); ++y)
    for (Index x = 0; x < mask.cols(); ++x) {
      const auto [sx, sy] = inv(x, y);
      const Index xx = static_cast<Index>(std::lround(sx)), yy = static_cast<Index>(std::lround(sy));
      if (xx >= 0 && yy >= 0 && xx < mask.cols() && yy < mask.rows()) out(y, x) = mask(yy, xx);
    }
  return out;
}

Index shift_pixels(double fraction, Index dim) {
  const Index n = static_cast<Index>(std::floor(std::abs(fraction) * static_cast<double>(dim)));
  return fraction < 0 ? -n : n;
}

namespace {

template <typename T>
Plane<T> shifted(const Plane<T>& src, Translation t, T fill) {
  const Index oy = shift_pixels(t.dy, src.rows()), ox = shift_pixels(t.dx, src.cols());
  Plane<T> out = Plane<T>::Constant(src.rows(), src.cols(), fill);
  for (Index y = 0; y < src.rows(); ++y)
    for (Index x = 0; x < src.cols(); ++x) {
      const Index yy = y - oy, xx = x - ox;
      if (xx >= 0 && yy >= 0 && xx < src.cols() && yy < src.rows()) out(y, x) = src(yy, xx);
    }
  return out;
}

}  // namespace

GrayImage translate_image(const GrayImage& img, Translation t, std::uint8_t fill) { return shifted(img, t, fill); }
BinaryMask translate_mask(const BinaryMask& mask, Translation t) { return shifted(mask, t, false); }

AugmentedPair augment_at(const MultiChannelImage& img, const BinaryMask& mask, const AugmentSpec& spec,
                         std::size_t index) {
  require(index < spec.count(), "augment_at: transform index out of range");
  for (const auto& p : img.planes) require(same_size(p, mask), "augment: image and mask dimensions differ");
  if (spec.include_original) {
    if (index == 0) return {img, mask};
    --index;
  }
  MultiChannelImage out;
  if (index < spec.angles.size()) {
    const double a = spec.angles[index];
    for (const auto& p : img.planes) out.planes.push_back(rotate_image(p, a));
    return {std::move(out), rotate_mask(mask, a)};
  }
  const Translation t = spec.translations[index - spec.angles.size()];
  for (const auto& p : img.planes) out.planes.push_back(translate_image(p, t));
  return {std::move(out), translate_mask(mask, t)};
}

std::vector<AugmentedPair> augment(const MultiChannelImage& img, const BinaryMask& mask, const AugmentSpec& spec) {
  spec.validate();
  std::vector<AugmentedPair> out;
  out.reserve(spec.count());
  for (std::size_t i = 0; i < spec.count(); ++i) out.push_back(augment_at(img, mask, spec, i));
  return out;
}

}  // namespace casr
