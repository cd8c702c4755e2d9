#pragma once

#include <array>
#include <string>
#include <vector>

#include "casr/image.hpp"

namespace casr {

/// 256-bin intensity histogram in real arithmetic.
struct Histogram {
  std::array<double, 256> bins{};

  double total() const;
  double max_bin() const;
};

Histogram histogram_of(const Eigen::Ref<const GrayImage>& region);

/// Clips every bin at clip_count and spreads the total excess evenly over all
/// 256 bins in a single pass. Mass is conserved.
Histogram clip_redistribute(const Histogram& hist, double clip_count);

struct ClaheConfig {
  int grid_w = 4;
  int grid_h = 4;
  /// Normalized clip limit: the effective clip count is
  /// clip_factor * tile_pixels / 256.
  double clip_factor = 8.0;
};

/// Equalization lookup of one tile: lut[v] = 255 * cdf(v) / total after
/// clipping. Returned as reals so interpolation happens before rounding.
std::array<double, 256> tile_mapping(const Eigen::Ref<const GrayImage>& tile, double clip_factor);

/// Non-overlapping tile partition along one axis: tile i spans
/// [floor(i * len / n), floor((i + 1) * len / n)). Its interpolation anchor is
/// the integer pixel start + (size / 2).
struct TileAxis {
  std::vector<Eigen::Index> start;
  std::vector<Eigen::Index> size;
  std::vector<Eigen::Index> anchor;
};
TileAxis tile_axis(Eigen::Index len, int n);

GrayImage clahe(const GrayImage& img, const ClaheConfig& cfg = {});

/// Canny edge detector: 5x5 Gaussian (sigma 1.4), Sobel gradients normalized
/// so an ideal step of height h peaks at magnitude h, 4-direction non-maximum
/// suppression, 8-connected double-threshold hysteresis.
BinaryMask canny(const GrayImage& img, double low, double high);

/// Smoothed Sobel gradient magnitude used by canny (exposed for tests).
FloatImage canny_gradient_magnitude(const GrayImage& img);

struct BenGrahamConfig {
  double canny_low = 30.0;
  double canny_high = 90.0;
  int closing_radius = 5;
  double crop_fraction = 0.9;
  double gray_offset = 128.0;
  /// Erode+dilate refinement of the inverted edge map with a 3x3 cross.
  bool cross_refinement = true;
};

/// Circular field-of-view mask derived from Canny edges.
BinaryMask field_mask(const GrayImage& img, const BenGrahamConfig& cfg = {});

/// Mean-centering over the field-of-view interior, re-centered at
/// gray_offset; exterior pixels are set to gray_offset. The result is
/// center-cropped to crop_fraction and resized back to the input size.
GrayImage ben_graham(const GrayImage& img, const BinaryMask& mask, const BenGrahamConfig& cfg = {});

/// Channel 0 = CLAHE, channel 1 = improved Ben Graham.
MultiChannelImage compose_multichannel(const GrayImage& clahe_ch, const GrayImage& bg_ch);

enum class ChannelMode { original, clahe, ben_graham, multi };

ChannelMode parse_channel_mode(const std::string& name);
std::string to_string(ChannelMode mode);

struct PreprocessConfig {
  ClaheConfig clahe;
  BenGrahamConfig ben_graham;
};

/// Full stage-1 enhancement for a raw frame, producing the planes selected by
/// `mode` (original and single-method modes yield one plane).
MultiChannelImage preprocess_image(const GrayImage& img, ChannelMode mode, const PreprocessConfig& cfg = {});

}  // namespace casr
