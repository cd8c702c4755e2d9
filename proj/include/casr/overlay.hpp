#pragma once

#include "casr/image.hpp"

namespace casr {

/// Error map: true positives green, false positives cyan, false negatives
/// red. True negatives are black, or the source image at half intensity when
/// one is given.
RgbImage render_overlay(const BinaryMask& pred, const BinaryMask& gt, const GrayImage* source = nullptr);

}  // namespace casr
