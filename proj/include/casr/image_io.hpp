#pragma once

#include <filesystem>

#include "casr/image.hpp"

namespace casr {

/// Reads a binary PGM (P5, maxval 255) or an 8-bit grayscale PNG.
GrayImage load_image(const std::filesystem::path& path);

/// Reads an 8-bit PNG as channel planes: gray -> 1 plane, gray+alpha -> 2
/// planes. Binary PGM also yields 1 plane.
MultiChannelImage load_multichannel(const std::filesystem::path& path);

/// Format is chosen by extension: ".pgm" writes P5, anything else PNG.
void save_image(const GrayImage& img, const std::filesystem::path& path);
void save_image(const BinaryMask& mask, const std::filesystem::path& path);
/// Always PNG, 8-bit RGB.
void save_image(const RgbImage& img, const std::filesystem::path& path);
/// 1 plane -> gray PNG, 2 planes -> gray+alpha PNG.
void save_image(const MultiChannelImage& img, const std::filesystem::path& path);

}  // namespace casr
