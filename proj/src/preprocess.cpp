#include "casr/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "casr/components.hpp"
#include "casr/error.hpp"
#include "casr/morphology.hpp"

namespace casr {

double Histogram::total() const {
  double s = 0.0;
  for (double b : bins) s += b;
  return s;
}

double Histogram::max_bin() const { return *std::max_element(bins.begin(), bins.end()); }

Histogram histogram_of(const Eigen::Ref<const GrayImage>& region) {
  Histogram h;
  for (Eigen::Index y = 0; y < region.rows(); ++y)
    for (Eigen::Index x = 0; x < region.cols(); ++x) h.bins[region(y, x)] += 1.0;
  return h;
}

Histogram clip_redistribute(const Histogram& hist, double clip_count) {
  require(clip_count > 0.0, "clip_redistribute: clip_count must be positive");
  double excess = 0.0;
  for (double b : hist.bins) excess += std::max(0.0, b - clip_count);
  const double share = excess / static_cast<double>(hist.bins.size());
  Histogram out;
  for (std::size_t i = 0; i < hist.bins.size(); ++i) out.bins[i] = std::min(hist.bins[i], clip_count) + share;
  return out;
}

std::array<double, 256> tile_mapping(const Eigen::Ref<const GrayImage>& tile, double clip_factor) {
  const auto pixels = static_cast<double>(tile.size());
  const Histogram clipped = clip_redistribute(histogram_of(tile), clip_factor * pixels / 256.0);
  const double total = clipped.total();
  std::array<double, 256> lut{};
  double cdf = 0.0;
  for (int v = 0; v < 256; ++v) {
    cdf += clipped.bins[v];
    lut[v] = 255.0 * cdf / total;
  }
  return lut;
}

TileAxis tile_axis(Eigen::Index len, int n) {
  TileAxis axis;
  for (int i = 0; i < n; ++i) {
    const Eigen::Index s = i * len / n;
    const Eigen::Index e = (i + 1) * len / n;
    axis.start.push_back(s);
    axis.size.push_back(e - s);
    axis.anchor.push_back(s + (e - s) / 2);
  }
  return axis;
}

namespace {

// Lower tile index and weight of the upper neighbor for coordinate p.
std::pair<int, double> interp_position(const TileAxis& axis, Eigen::Index p) {
  const int n = static_cast<int>(axis.anchor.size());
  if (p <= axis.anchor.front()) return {0, 0.0};
  if (p >= axis.anchor.back()) return {n - 1, 0.0};
  int i = 0;
  while (axis.anchor[i + 1] <= p) ++i;
  const double t = static_cast<double>(p - axis.anchor[i]) / static_cast<double>(axis.anchor[i + 1] - axis.anchor[i]);
  return {i, t};
}

}  // namespace

GrayImage clahe(const GrayImage& img, const ClaheConfig& cfg) {
  require(cfg.grid_w >= 1 && cfg.grid_h >= 1, "clahe: grid dims must be >= 1");
  require(cfg.clip_factor >= 1.0, "clahe: clip_factor must be >= 1");
  require(img.cols() >= cfg.grid_w && img.rows() >= cfg.grid_h, "clahe: image smaller than tile grid");

  const TileAxis ax = tile_axis(img.cols(), cfg.grid_w);
  const TileAxis ay = tile_axis(img.rows(), cfg.grid_h);
  std::vector<std::array<double, 256>> luts;
  luts.reserve(static_cast<std::size_t>(cfg.grid_w * cfg.grid_h));
  for (int ty = 0; ty < cfg.grid_h; ++ty)
    for (int tx = 0; tx < cfg.grid_w; ++tx)
      luts.push_back(tile_mapping(img.block(ay.start[ty], ax.start[tx], ay.size[ty], ax.size[tx]), cfg.clip_factor));
  auto lut = [&](int ty, int tx) -> const std::array<double, 256>& { return luts[ty * cfg.grid_w + tx]; };

  GrayImage out(img.rows(), img.cols());
  for (Eigen::Index y = 0; y < img.rows(); ++y) {
    const auto [ty, fy] = interp_position(ay, y);
    const int ty1 = std::min(ty + 1, cfg.grid_h - 1);
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      const auto [tx, fx] = interp_position(ax, x);
      const int tx1 = std::min(tx + 1, cfg.grid_w - 1);
      const auto v = img(y, x);
      const double top = (1.0 - fx) * lut(ty, tx)[v] + fx * lut(ty, tx1)[v];
      const double bot = (1.0 - fx) * lut(ty1, tx)[v] + fx * lut(ty1, tx1)[v];
      out(y, x) = static_cast<std::uint8_t>(std::clamp(std::round((1.0 - fy) * top + fy * bot), 0.0, 255.0));
    }
  }
  return out;
}

namespace {

std::array<double, 5> gaussian_kernel5(double sigma) {
  std::array<double, 5> k{};
  double sum = 0.0;
  for (int i = -2; i <= 2; ++i) {
    k[i + 2] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + 2];
  }
  for (double& v : k) v /= sum;
  return k;
}

FloatImage gaussian_blur5(const GrayImage& img, double sigma) {
  const std::array<double, 5> k = gaussian_kernel5(sigma);

  const auto h = img.rows();
  const auto w = img.cols();
  auto clampi = [](Eigen::Index v, Eigen::Index hi) { return std::clamp<Eigen::Index>(v, 0, hi - 1); };
  FloatImage tmp(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * img(y, clampi(x + i, w));
      tmp(y, x) = acc;
    }
  FloatImage out(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * tmp(clampi(y + i, h), x);
      out(y, x) = acc;
    }
  return out;
}

struct Gradients {
  FloatImage gx, gy, mag;
};

// Divides raw Sobel responses so that an ideal step of height h, after the
// 5x5 smoothing, peaks at magnitude h: the central difference of the blurred
// step is h * (k0 + k1) and the [1 2 1] cross-weighting adds a factor 4.
Gradients sobel(const FloatImage& s, double gain) {
  const auto h = s.rows();
  const auto w = s.cols();
  auto at = [&](Eigen::Index y, Eigen::Index x) {
    return s(std::clamp<Eigen::Index>(y, 0, h - 1), std::clamp<Eigen::Index>(x, 0, w - 1));
  };
  Gradients g{FloatImage(h, w), FloatImage(h, w), FloatImage(h, w)};
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const double gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
      g.gx(y, x) = gx / gain;
      g.gy(y, x) = gy / gain;
      g.mag(y, x) = std::hypot(gx, gy) / gain;
    }
  return g;
}

constexpr double kCannySigma = 1.4;

Gradients smoothed_gradients(const GrayImage& img) {
  const auto k = gaussian_kernel5(kCannySigma);
  return sobel(gaussian_blur5(img, kCannySigma), 4.0 * (k[2] + k[1]));
}

}  // namespace

FloatImage canny_gradient_magnitude(const GrayImage& img) { return smoothed_gradients(img).mag; }

BinaryMask canny(const GrayImage& img, double low, double high) {
  require(low > 0.0 && low < high, "canny: thresholds must satisfy 0 < low < high");
  const auto h = img.rows();
  const auto w = img.cols();
  const Gradients g = smoothed_gradients(img);
  auto mag = [&](Eigen::Index y, Eigen::Index x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
    return g.mag(y, x);
  };

  // Non-maximum suppression; ties along the gradient keep the pixel on the
  // low-coordinate side so a symmetric step yields a single line.
  FloatImage thin = FloatImage::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const double m = g.mag(y, x);
      if (m <= 0.0) continue;
      double angle = std::atan2(g.gy(y, x), g.gx(y, x)) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      int dy = 0, dx = 0;
      if (angle < 22.5 || angle >= 157.5) {
        dx = 1;
      } else if (angle < 67.5) {
        dx = 1;
        dy = 1;
      } else if (angle < 112.5) {
        dy = 1;
      } else {
        dx = -1;
        dy = 1;
      }
      if (m > mag(y - dy, x - dx) && m >= mag(y + dy, x + dx)) thin(y, x) = m;
    }

  BinaryMask edges = BinaryMask::Constant(h, w, false);
  std::deque<std::pair<Eigen::Index, Eigen::Index>> queue;
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      if (thin(y, x) >= high) {
        edges(y, x) = true;
        queue.emplace_back(y, x);
      }
  while (!queue.empty()) {
    const auto [y, x] = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const auto yy = y + dy;
        const auto xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w || edges(yy, xx)) continue;
        if (thin(yy, xx) >= low) {
          edges(yy, xx) = true;
          queue.emplace_back(yy, xx);
        }
      }
  }
  return edges;
}

BinaryMask field_mask(const GrayImage& img, const BenGrahamConfig& cfg) {
  require(cfg.closing_radius >= 0, "field_mask: closing_radius must be >= 0");
  BinaryMask region = !canny(img, cfg.canny_low, cfg.canny_high);
  if (cfg.cross_refinement) region = open(region, cross_element());

  // Regions of the inverted edge map that reach the frame border lie outside
  // the circular patch, unless the center itself is one of them (no enclosing
  // boundary was found, e.g. a frame without a patch).
  const auto labels = connected_components(region, 4);
  const auto cy = img.rows() / 2;
  const auto cx = img.cols() / 2;
  const auto center_label = labels.labels(cy, cx);
  std::vector<bool> exterior(static_cast<std::size_t>(labels.count()) + 1, false);
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x)
      if (y == 0 || x == 0 || y == img.rows() - 1 || x == img.cols() - 1) exterior[labels.labels(y, x)] = true;
  exterior[0] = false;

  BinaryMask fov(img.rows(), img.cols());
  if (center_label > 0 && exterior[center_label]) {
    fov = labels.labels == center_label;
  } else {
    fov = labels.labels.unaryExpr([&](std::int32_t l) { return l == 0 || !exterior[l]; });
  }
  if (cfg.closing_radius > 0) fov = close(fov, disk_element(cfg.closing_radius));

  const auto parts = connected_components(fov, 8);
  const auto keep = parts.labels(cy, cx);
  if (keep == 0) return BinaryMask::Constant(img.rows(), img.cols(), false);
  return parts.labels == keep;
}

GrayImage ben_graham(const GrayImage& img, const BinaryMask& mask, const BenGrahamConfig& cfg) {
  require(same_size(img, mask), "ben_graham: mask dims must equal image dims");
  const auto interior = mask.count();
  if (interior == 0) throw ContractError("ben_graham: empty field-of-view mask");
  const double mean = mask.select(img.cast<double>(), 0.0).sum() / static_cast<double>(interior);
  const FloatImage centered = mask.select(img.cast<double>() - mean + cfg.gray_offset, cfg.gray_offset);
  const GrayImage shifted = quantize(centered);
  if (cfg.crop_fraction >= 1.0) return shifted;
  return resize_bilinear(crop_center(shifted, cfg.crop_fraction), img.cols(), img.rows());
}

MultiChannelImage compose_multichannel(const GrayImage& clahe_ch, const GrayImage& bg_ch) {
  require(same_size(clahe_ch, bg_ch), "compose_multichannel: dimension mismatch");
  MultiChannelImage out;
  out.planes = {clahe_ch, bg_ch};
  return out;
}

ChannelMode parse_channel_mode(const std::string& name) {
  if (name == "orig" || name == "original") return ChannelMode::original;
  if (name == "clahe") return ChannelMode::clahe;
  if (name == "bg" || name == "ben_graham") return ChannelMode::ben_graham;
  if (name == "multi") return ChannelMode::multi;
  throw ContractError("unknown channel mode '" + name + "' (expected orig|clahe|bg|multi)");
}

std::string to_string(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::original: return "orig";
    case ChannelMode::clahe: return "clahe";
    case ChannelMode::ben_graham: return "bg";
    case ChannelMode::multi: return "multi";
  }
  return "multi";
}

MultiChannelImage preprocess_image(const GrayImage& img, ChannelMode mode, const PreprocessConfig& cfg) {
  MultiChannelImage out;
  switch (mode) {
    case ChannelMode::original:
      out.planes = {img};
      break;
    case ChannelMode::clahe:
      out.planes = {clahe(img, cfg.clahe)};
      break;
    case ChannelMode::ben_graham:
      out.planes = {ben_graham(img, field_mask(img, cfg.ben_graham), cfg.ben_graham)};
      break;
    case ChannelMode::multi:
      out = compose_multichannel(clahe(img, cfg.clahe), ben_graham(img, field_mask(img, cfg.ben_graham), cfg.ben_graham));
      break;
  }
  return out;
}

}  // namespace casr
