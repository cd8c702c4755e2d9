#include "casr/overlay.hpp"

#include "casr/error.hpp"

namespace casr {

RgbImage render_overlay(const BinaryMask& pred, const BinaryMask& gt, const GrayImage* source) {
  require(same_size(pred, gt), "render_overlay: dimension mismatch");
  require(source == nullptr || same_size(*source, gt), "render_overlay: source dimension mismatch");
  RgbImage out(gt.rows(), gt.cols());
  for (Eigen::Index y = 0; y < gt.rows(); ++y)
    for (Eigen::Index x = 0; x < gt.cols(); ++x) {
      const bool p = pred(y, x), g = gt(y, x);
      std::uint8_t r = 0, gr = 0, b = 0;
      if (p && g) {
        gr = 255;
      } else if (p) {
        gr = b = 255;
      } else if (g) {
        r = 255;
      } else if (source) {
        r = gr = b = static_cast<std::uint8_t>((*source)(y, x) / 2);
      }
      out.r(y, x) = r;
      out.g(y, x) = gr;
      out.b(y, x) = b;
    }
  return out;
}

}  // namespace casr
