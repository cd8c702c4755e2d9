#pragma once

#include <cstdint>
#include <vector>

#include "casr/image.hpp"

namespace casr {

/// Synthetic angiogram-like vessel tree. Widths are full stroke widths in
/// pixels; a pixel belongs to a vessel when its center lies within half the
/// local width of the centerline.
struct PhantomSpec {
  int size = 64;
  int n_branches = 3;
  double width_min = 2.0;
  double width_max = 5.0;
  double stenosis_probability = 0.3;
  double pinch = 0.4;  // width multiplier at the stenosis center
  double noise_sigma = 6.0;
  bool vignette = true;
  double background = 170.0;
  double contrast = 70.0;   // vessels are this much darker than background
  double curvature = 0.25;  // control-point offset as a fraction of branch length
  double taper = 0.3;       // fractional width loss from start to end of a branch
  std::uint64_t seed = 0;

  void validate() const;
};

struct CenterlineSample {
  double x = 0, y = 0, radius = 0;
};

struct Branch {
  std::vector<CenterlineSample> samples;  // dense, at most half a pixel apart
  bool stenosis = false;
  double stenosis_t = 0.0;  // curve parameter of the pinch center
  double nominal_radius = 0.0;  // start radius before tapering
};

struct Phantom {
  GrayImage image;
  BinaryMask mask;
  std::vector<Branch> branches;
};

/// Quadratic-spline centerline tree stroked with tapering width, optional
/// Gaussian width pinches, vignette disk, and Gaussian noise. The mask is the
/// noiseless stroked region (inside the vignette disk when enabled).
Phantom synth_phantom(const PhantomSpec& spec);

/// Rasterizes samples as a chain of segments with linearly interpolated
/// radius, ORing into `mask`.
void stroke(BinaryMask& mask, const std::vector<CenterlineSample>& samples);

/// Radius of the vignette field-of-view disk centered on the canvas.
double vignette_radius(int size);

}  // namespace casr
