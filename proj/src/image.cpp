#include "casr/image.hpp"

#include <algorithm>
#include <cmath>

#include "casr/error.hpp"

namespace casr {

GrayImage mask_to_gray(const BinaryMask& mask) {
  return mask.select(GrayImage::Constant(mask.rows(), mask.cols(), 255),
                     GrayImage::Zero(mask.rows(), mask.cols()));
}

BinaryMask gray_to_mask(const GrayImage& img) { return img != 0; }

GrayImage quantize(const FloatImage& img) {
  return img.unaryExpr([](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
  });
}

GrayImage crop_center(const GrayImage& img, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "crop_center: fraction must be in (0,1]");
  const auto new_w = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(fraction * img.cols())));
  const auto new_h = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(fraction * img.rows())));
  const auto x0 = (img.cols() - new_w) / 2;
  const auto y0 = (img.rows() - new_h) / 2;
  return img.block(y0, x0, new_h, new_w);
}

namespace {

// Source coordinate of a destination sample under half-pixel-center alignment.
inline double source_coord(Eigen::Index dst, Eigen::Index src_len, Eigen::Index dst_len) {
  const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(src_len) /
                       static_cast<double>(dst_len) -
                   0.5;
  return std::clamp(s, 0.0, static_cast<double>(src_len - 1));
}

template <typename T>
FloatImage resize_impl(const Plane<T>& img, Eigen::Index new_w, Eigen::Index new_h) {
  require(new_w > 0 && new_h > 0, "resize_bilinear: target dims must be positive");
  require(img.size() > 0, "resize_bilinear: empty source");
  FloatImage out(new_h, new_w);
  for (Eigen::Index y = 0; y < new_h; ++y) {
    const double sy = source_coord(y, img.rows(), new_h);
    const auto y0 = static_cast<Eigen::Index>(std::floor(sy));
    const auto y1 = std::min(y0 + 1, img.rows() - 1);
    const double fy = sy - static_cast<double>(y0);
    for (Eigen::Index x = 0; x < new_w; ++x) {
      const double sx = source_coord(x, img.cols(), new_w);
      const auto x0 = static_cast<Eigen::Index>(std::floor(sx));
      const auto x1 = std::min(x0 + 1, img.cols() - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = (1.0 - fx) * static_cast<double>(img(y0, x0)) + fx * static_cast<double>(img(y0, x1));
      const double bot = (1.0 - fx) * static_cast<double>(img(y1, x0)) + fx * static_cast<double>(img(y1, x1));
      out(y, x) = (1.0 - fy) * top + fy * bot;
    }
  }
  return out;
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& img, Eigen::Index new_w, Eigen::Index new_h) {
  if (new_w == img.cols() && new_h == img.rows()) return img;
  return quantize(resize_impl(img, new_w, new_h));
}

FloatImage resize_bilinear(const FloatImage& img, Eigen::Index new_w, Eigen::Index new_h) {
  if (new_w == img.cols() && new_h == img.rows()) return img;
  return resize_impl(img, new_w, new_h);
}

}  // namespace casr
