#pragma once

#include <utility>
#include <vector>

#include "casr/image.hpp"

namespace casr {

struct Translation {
  double dy = 0.0, dx = 0.0;  // fractions of height and width, in (-1, 1)
};

struct AugmentSpec {
  std::vector<double> angles;  // degrees, counterclockwise
  std::vector<Translation> translations;
  bool include_original = true;

  /// Rotations of +-5, 10, 15, 30, 45, 60, 75, 90 degrees and the eight
  /// combinations of +-5% and +-10% shifts along each axis.
  static AugmentSpec defaults();
  /// No transforms beyond the original.
  static AugmentSpec none() { return {{}, {}, true}; }

  std::size_t count() const { return angles.size() + translations.size() + (include_original ? 1 : 0); }
  void validate() const;
};

/// Border fill for rotated/shifted image channels (50% gray).
inline constexpr std::uint8_t kAugmentFill = 128;

/// Rotation about the pixel-grid center ((w-1)/2, (h-1)/2), no rescaling.
GrayImage rotate_image(const GrayImage& img, double degrees, std::uint8_t fill = kAugmentFill);
BinaryMask rotate_mask(const BinaryMask& mask, double degrees);

/// Integer shift: sign(f) * floor(|f| * dim) pixels, positive = down/right.
Eigen::Index shift_pixels(double fraction, Eigen::Index dim);
GrayImage translate_image(const GrayImage& img, Translation t, std::uint8_t fill = kAugmentFill);
BinaryMask translate_mask(const BinaryMask& mask, Translation t);

using AugmentedPair = std::pair<MultiChannelImage, BinaryMask>;

/// The index-th transform of the sequence produced by augment().
AugmentedPair augment_at(const MultiChannelImage& img, const BinaryMask& mask, const AugmentSpec& spec,
                         std::size_t index);

/// Original (if requested), then every rotation, then every translation;
/// image and mask always receive the same transform.
std::vector<AugmentedPair> augment(const MultiChannelImage& img, const BinaryMask& mask, const AugmentSpec& spec);

}  // namespace casr
