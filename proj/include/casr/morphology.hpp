#pragma once

#include <utility>
#include <vector>

#include "casr/image.hpp"

namespace casr {

/// Structuring element as (dy, dx) offsets relative to the anchor.
using StructuringElement = std::vector<std::pair<int, int>>;

StructuringElement cross_element();  // 3x3 plus-shape
StructuringElement square_element(int radius);
StructuringElement disk_element(int radius);

/// Out-of-bounds pixels never contribute to dilation and are ignored by
/// erosion, so a full-frame mask survives erosion unchanged.
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se);
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se);

inline BinaryMask close(const BinaryMask& mask, const StructuringElement& se) { return erode(dilate(mask, se), se); }
inline BinaryMask open(const BinaryMask& mask, const StructuringElement& se) { return dilate(erode(mask, se), se); }

}  // namespace casr
