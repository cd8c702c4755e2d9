#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace casr {

/// Row-major raster plane: rows() is the image height, cols() the width.
template <typename T>
using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GrayImage = Plane<std::uint8_t>;
using FloatImage = Plane<double>;
/// true = foreground (vessel).
using BinaryMask = Plane<bool>;

/// Channel-major stack of equally sized 8-bit planes.
struct MultiChannelImage {
  std::vector<GrayImage> planes;

  int channels() const { return static_cast<int>(planes.size()); }
  Eigen::Index width() const { return planes.empty() ? 0 : planes.front().cols(); }
  Eigen::Index height() const { return planes.empty() ? 0 : planes.front().rows(); }
};

struct RgbImage {
  GrayImage r, g, b;

  RgbImage() = default;
  RgbImage(Eigen::Index height, Eigen::Index width)
      : r(GrayImage::Zero(height, width)),
        g(GrayImage::Zero(height, width)),
        b(GrayImage::Zero(height, width)) {}

  Eigen::Index width() const { return r.cols(); }
  Eigen::Index height() const { return r.rows(); }
};

template <typename A, typename B>
bool same_size(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

/// Masks serialize as 0/255.
GrayImage mask_to_gray(const BinaryMask& mask);
/// Any nonzero pixel is foreground.
BinaryMask gray_to_mask(const GrayImage& img);

/// Round-and-clamp conversion to 8 bits.
GrayImage quantize(const FloatImage& img);

/// Centered crop to floor(fraction * dims); the offset is floor((dim - new_dim) / 2).
GrayImage crop_center(const GrayImage& img, double fraction);

/// Bilinear resampling with half-pixel-center alignment and edge clamping.
GrayImage resize_bilinear(const GrayImage& img, Eigen::Index new_w, Eigen::Index new_h);
FloatImage resize_bilinear(const FloatImage& img, Eigen::Index new_w, Eigen::Index new_h);

}  // namespace casr
