#include "casr/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "casr/error.hpp"
#include "casr/random.hpp"

namespace casr {

using Eigen::Index;

void PhantomSpec::validate() const {
  require(size >= 8, "phantom: size must be >= 8");
  require(n_branches >= 1, "phantom: n_branches must be >= 1");
  require(width_min >= 1.0 && width_max >= width_min, "phantom: widths must satisfy 1 <= width_min <= width_max");
  require(stenosis_probability >= 0.0 && stenosis_probability <= 1.0, "phantom: stenosis probability must be in [0,1]");
  require(pinch > 0.0 && pinch <= 1.0, "phantom: pinch must be in (0,1]");
  require(noise_sigma >= 0.0, "phantom: noise sigma must be >= 0");
  require(contrast >= 0.0 && background >= contrast && background <= 255.0, "phantom: intensity levels out of range");
  require(curvature >= 0.0, "phantom: curvature must be >= 0");
  require(taper >= 0.0 && taper < 1.0, "phantom: taper must be in [0,1)");
}

double vignette_radius(int size) { return 0.47 * size; }

namespace {

constexpr double kPinchSpread = 0.06;  // Gaussian half-width in curve parameter
constexpr double kMinRadius = 0.5;     // keeps pinched strokes 8-connected

struct Point {
  double x, y;
};

Point bezier(Point a, Point c, Point b, double t) {
  const double u = 1.0 - t;
  return {u * u * a.x + 2 * u * t * c.x + t * t * b.x, u * u * a.y + 2 * u * t * c.y + t * t * b.y};
}

Branch make_branch(Point a, Point b, double r0, const PhantomSpec& spec, std::mt19937_64& rng) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const double nx = -(b.y - a.y) / std::max(len, 1e-12), ny = (b.x - a.x) / std::max(len, 1e-12);
  const double bend = spec.curvature * len * uniform_real(rng, -1.0, 1.0);
  const Point c{(a.x + b.x) / 2 + nx * bend, (a.y + b.y) / 2 + ny * bend};

  Branch br;
  br.nominal_radius = r0;
  br.stenosis = uniform_real(rng, 0.0, 1.0) < spec.stenosis_probability;
  br.stenosis_t = uniform_real(rng, 0.3, 0.7);
  // The control polygon bounds the curve length, so this spacing is <= 0.5 px.
  const double polygon = std::hypot(c.x - a.x, c.y - a.y) + std::hypot(b.x - c.x, b.y - c.y);
  const int n = std::max(2, static_cast<int>(std::ceil(2.0 * polygon)) + 1);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    const Point p = bezier(a, c, b, t);
    double r = r0 * (1.0 - spec.taper * t);
    if (br.stenosis) {
      const double z = (t - br.stenosis_t) / kPinchSpread;
      r *= 1.0 - (1.0 - spec.pinch) * std::exp(-z * z);
    }
    br.samples.push_back({p.x, p.y, std::max(r, kMinRadius)});
  }
  return br;
}

}  // namespace

void stroke(BinaryMask& mask, const std::vector<CenterlineSample>& samples) {
  const auto paint_segment = [&](const CenterlineSample& p, const CenterlineSample& q) {
    const double rmax = std::max(p.radius, q.radius);
    const Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(std::min(p.x, q.x) - rmax)));
    const Index x1 = std::min<Index>(mask.cols() - 1, static_cast<Index>(std::ceil(std::max(p.x, q.x) + rmax)));
    const Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(std::min(p.y, q.y) - rmax)));
    const Index y1 = std::min<Index>(mask.rows() - 1, static_cast<Index>(std::ceil(std::max(p.y, q.y) + rmax)));
    const double dx = q.x - p.x, dy = q.y - p.y;
    const double len2 = dx * dx + dy * dy;
    for (Index y = y0; y <= y1; ++y)
      for (Index x = x0; x <= x1; ++x) {
        double t = len2 > 0 ? ((x - p.x) * dx + (y - p.y) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = p.x + t * dx - x, ey = p.y + t * dy - y;
        const double r = p.radius + t * (q.radius - p.radius);
        if (ex * ex + ey * ey <= r * r) mask(y, x) = true;
      }
  };
  if (samples.size() == 1) paint_segment(samples[0], samples[0]);
  for (std::size_t i = 1; i < samples.size(); ++i) paint_segment(samples[i - 1], samples[i]);
}

Phantom synth_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const double s = spec.size;
  const Point center{(s - 1) / 2, (s - 1) / 2};

  Phantom ph;
  // Trunk: enters from beyond one edge and ends inside the far half.
  {
    const double theta = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
    const double ux = std::cos(theta), uy = std::sin(theta);
    const double jitter = uniform_real(rng, -0.2, 0.2) * s;
    const Point a{center.x - 0.6 * s * ux - uy * jitter, center.y - 0.6 * s * uy + ux * jitter};
    const double reach = uniform_real(rng, 0.15, 0.4) * s;
    const Point b{center.x + reach * ux, center.y + reach * uy};
    const double r0 = uniform_real(rng, spec.width_min, spec.width_max) / 2;
    ph.branches.push_back(make_branch(a, b, r0, spec, rng));
  }
  // Side branches leave an existing branch at 25-70 degrees.
  for (int k = 1; k < spec.n_branches; ++k) {
    const Branch& parent = ph.branches[uniform_index(rng, ph.branches.size())];
    const auto& ps = parent.samples;
    const std::size_t i = static_cast<std::size_t>(uniform_real(rng, 0.25, 0.75) * static_cast<double>(ps.size() - 1));
    const std::size_t j = std::min(i + 1, ps.size() - 1), h = j == i ? i - 1 : i;
    const double heading = std::atan2(ps[j].y - ps[h].y, ps[j].x - ps[h].x);
    const double turn = uniform_real(rng, 25.0, 70.0) * std::numbers::pi / 180.0 *
                        (uniform_real(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    const double len = uniform_real(rng, 0.3, 0.55) * s;
    const Point a{ps[i].x, ps[i].y};
    const Point b{std::clamp(a.x + len * std::cos(heading + turn), 2.0, s - 3.0),
                  std::clamp(a.y + len * std::sin(heading + turn), 2.0, s - 3.0)};
    const double r0 = std::max(spec.width_min / 2, 0.75 * ps[i].radius);
    ph.branches.push_back(make_branch(a, b, r0, spec, rng));
  }

  ph.mask = BinaryMask::Zero(spec.size, spec.size);
  for (const Branch& br : ph.branches) stroke(ph.mask, br.samples);

  BinaryMask field = BinaryMask::Constant(spec.size, spec.size, true);
  if (spec.vignette) {
    const double r = vignette_radius(spec.size);
    for (Index y = 0; y < spec.size; ++y)
      for (Index x = 0; x < spec.size; ++x) field(y, x) = std::hypot(x - center.x, y - center.y) <= r;
    ph.mask = ph.mask && field;
  }

  const double outside = 0.15 * spec.background;
  FloatImage img(spec.size, spec.size);
  for (Index y = 0; y < spec.size; ++y)
    for (Index x = 0; x < spec.size; ++x) {
      double v = !field(y, x) ? outside : spec.background - (ph.mask(y, x) ? spec.contrast : 0.0);
      if (spec.noise_sigma > 0) v += spec.noise_sigma * standard_normal(rng);
      img(y, x) = v;
    }
  ph.image = quantize(img);
  return ph;
}

}  // namespace casr
