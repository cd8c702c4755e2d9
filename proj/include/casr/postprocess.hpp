#pragma once

#include <cstdint>
#include <vector>

#include "casr/components.hpp"
#include "casr/image.hpp"

namespace casr {

struct Pixel {
  Eigen::Index x = 0, y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// A mask constrained to one-pixel-wide curves.
using Skeleton = BinaryMask;
using EndpointSet = std::vector<Pixel>;

/// Candidate straight connection between two skeleton endpoints.
struct PatchLine {
  Pixel a, b;
  std::vector<Pixel> pixels;  // Bresenham raster from a to b, inclusive
  bool valid = false;

  Eigen::Index length() const { return static_cast<Eigen::Index>(pixels.size()); }
};

/// Removes every 8-connected component with fewer than `area_threshold`
/// pixels by ANDing the mask with the inverse of those components.
BinaryMask contour_refine(const BinaryMask& mask, std::int64_t area_threshold);

/// Zhang-Suen thinning to a fixpoint. Deletions are re-checked sequentially
/// against the live image so 8-connected components are never split or
/// removed, and a final pass clears simple pixels from any remaining 2x2 block.
Skeleton thin(const BinaryMask& mask);

/// Skeleton pixels with exactly one 8-neighbor, in row-major order.
EndpointSet detect_endpoints(const Skeleton& skel);

/// Inclusive 8-connected Bresenham raster.
std::vector<Pixel> bresenham(Pixel a, Pixel b);

/// Pairs each endpoint with its nearest other endpoint at Euclidean distance
/// <= max_dist (ties go to the partner earliest in row-major order), drops
/// symmetric duplicates, and rasterizes each pair.
std::vector<PatchLine> propose_connections(const EndpointSet& eps, double max_dist);

/// Half-width of the endpoint exclusion disks in the scan region.
inline constexpr int kEndpointExclusionRadius = 2;

/// Scan region: line dilated by one pixel, minus radius-2 disks at both
/// endpoints. D = (line pixels) - (foreground pixels in the region), so a line
/// across empty space scores its own length. The line bridges a genuine gap
/// iff D >= tau.
bool validate_connection(const BinaryMask& mask, const PatchLine& line, int tau);
/// The D statistic itself.
std::int64_t connection_score(const BinaryMask& mask, const PatchLine& line);

struct PatchConfig {
  double max_dist = 20.0;
  int tau = 3;
  int line_width = 2;
};

/// thin -> detect_endpoints -> propose_connections -> validate, then ORs the
/// valid lines (drawn line_width pixels wide) into the mask.
BinaryMask patch_lines(const BinaryMask& mask, const PatchConfig& cfg = {});
/// Same, also reporting every candidate with its validity flag.
BinaryMask patch_lines(const BinaryMask& mask, const PatchConfig& cfg, std::vector<PatchLine>& candidates);

/// ORs `n_clusters` filled disks into gt. Centers are drawn uniformly from the
/// background pixels and radii uniformly from [radius_min, radius_max].
BinaryMask corrupt_mask(const BinaryMask& gt, std::uint64_t seed, int n_clusters, int radius_min, int radius_max);

}  // namespace casr
