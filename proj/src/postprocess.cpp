#include "casr/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "casr/error.hpp"
#include "casr/random.hpp"

namespace casr {

using Eigen::Index;

BinaryMask contour_refine(const BinaryMask& mask, std::int64_t area_threshold) {
  require(area_threshold >= 0, "contour_refine: area_threshold must be >= 0");
  const ComponentSet cs = connected_components(mask, 8);
  BinaryMask removal = BinaryMask::Zero(mask.rows(), mask.cols());
  for (Index y = 0; y < mask.rows(); ++y)
    for (Index x = 0; x < mask.cols(); ++x) {
      const auto label = cs.labels(y, x);
      if (label > 0 && cs.areas[static_cast<std::size_t>(label - 1)] < area_threshold) removal(y, x) = true;
    }
  return mask && !removal;
}

namespace {

// Neighbors P2..P9 clockwise from north, in the usual Zhang-Suen numbering.
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};

struct Neighborhood {
  bool p[8];

  Neighborhood(const BinaryMask& m, Index y, Index x) {
    for (int k = 0; k < 8; ++k) {
      const Index yy = y + kDy[k], xx = x + kDx[k];
      p[k] = yy >= 0 && xx >= 0 && yy < m.rows() && xx < m.cols() && m(yy, xx);
    }
  }

  int count() const { return static_cast<int>(std::count(std::begin(p), std::end(p), true)); }

  // 0 -> 1 transitions around the ordered cycle P2, P3, ..., P9, P2.
  int transitions() const {
    int a = 0;
    for (int k = 0; k < 8; ++k) a += !p[k] && p[(k + 1) % 8];
    return a;
  }

  // Yokoi 8-connectivity number; a foreground pixel is simple iff it is 1.
  int connectivity8() const {
    int n = 0;
    for (int k = 0; k < 8; k += 2) {
      const bool a = !p[k], b = !p[(k + 1) % 8], c = !p[(k + 2) % 8];
      n += a - (a && b && c);
    }
    return n;
  }
};

bool zhang_suen_candidate(const Neighborhood& n, bool first) {
  const int b = n.count();
  if (b < 2 || b > 6 || n.transitions() != 1) return false;
  const bool* p = n.p;  // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
  if (first) return !(p[0] && p[2] && p[4]) && !(p[2] && p[4] && p[6]);
  return !(p[0] && p[2] && p[6]) && !(p[0] && p[4] && p[6]);
}

// Deleting a simple pixel keeps every 8-connected component intact (an
// isolated pixel is never simple).
bool simple(const BinaryMask& m, Index y, Index x) { return Neighborhood(m, y, x).connectivity8() == 1; }

// Number of 8-connected groups formed by the foreground neighbors alone.
int neighbor_groups(const Neighborhood& n) {
  int seen = 0, groups = 0;
  for (int start = 0; start < 8; ++start) {
    if (!n.p[start] || (seen >> start & 1)) continue;
    ++groups;
    int stack[8], top = 0;
    stack[top++] = start;
    seen |= 1 << start;
    while (top > 0) {
      const int k = stack[--top];
      for (int j = 0; j < 8; ++j) {
        if (!n.p[j] || (seen >> j & 1)) continue;
        if (std::abs(kDy[j] - kDy[k]) <= 1 && std::abs(kDx[j] - kDx[k]) <= 1) {
          seen |= 1 << j;
          stack[top++] = j;
        }
      }
    }
  }
  return groups;
}

bool full_block_at(const BinaryMask& m, Index y, Index x) {
  for (Index oy = -1; oy <= 0; ++oy)
    for (Index ox = -1; ox <= 0; ++ox) {
      const Index y0 = y + oy, x0 = x + ox;
      if (y0 < 0 || x0 < 0 || y0 + 1 >= m.rows() || x0 + 1 >= m.cols()) continue;
      if (m(y0, x0) && m(y0 + 1, x0) && m(y0, x0 + 1) && m(y0 + 1, x0 + 1)) return true;
    }
  return false;
}

}  // namespace

Skeleton thin(const BinaryMask& mask) {
  Skeleton s = mask;
  std::vector<std::pair<Index, Index>> marked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const bool first : {true, false}) {
      marked.clear();
      for (Index y = 0; y < s.rows(); ++y)
        for (Index x = 0; x < s.cols(); ++x)
          if (s(y, x) && zhang_suen_candidate(Neighborhood(s, y, x), first)) marked.emplace_back(y, x);
      for (const auto& [y, x] : marked)
        if (simple(s, y, x)) {
          s(y, x) = false;
          changed = true;
        }
    }
  }
  // Staircase corners and enclosed holes can leave 2x2 blocks that the
  // hole-preserving test above refuses to touch. Here only foreground
  // connectivity must survive: a pixel goes if its neighbors stay locally
  // connected, or failing that, if the global component count is unchanged.
  // Blocks whose every pixel joins otherwise separate arms (an X crossing)
  // cannot be thinned without splitting a component and remain.
  int components = -1;
  changed = true;
  while (changed) {
    changed = false;
    for (Index y = 0; y < s.rows(); ++y)
      for (Index x = 0; x < s.cols(); ++x) {
        if (!s(y, x) || !full_block_at(s, y, x)) continue;
        const Neighborhood n(s, y, x);
        if (n.count() < 2) continue;
        bool ok = neighbor_groups(n) == 1;
        s(y, x) = false;
        if (!ok) {
          if (components < 0) {
            s(y, x) = true;
            components = count_components(s);
            s(y, x) = false;
          }
          ok = count_components(s) == components;
        }
        if (ok) {
          changed = true;
        } else {
          s(y, x) = true;
        }
      }
  }
  return s;
}

EndpointSet detect_endpoints(const Skeleton& skel) {
  EndpointSet out;
  for (Index y = 0; y < skel.rows(); ++y)
    for (Index x = 0; x < skel.cols(); ++x)
      if (skel(y, x) && Neighborhood(skel, y, x).count() == 1) out.push_back({x, y});
  return out;
}

std::vector<Pixel> bresenham(Pixel a, Pixel b) {
  std::vector<Pixel> out;
  const Index dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
  const Index sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
  Index err = dx + dy;
  Pixel p = a;
  while (true) {
    out.push_back(p);
    if (p == b) break;
    const Index e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      p.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      p.y += sy;
    }
  }
  return out;
}

std::vector<PatchLine> propose_connections(const EndpointSet& eps, double max_dist) {
  std::vector<PatchLine> out;
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  // Partner ties resolve to row-major order, independent of input order.
  std::vector<std::size_t> order(eps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::pair(eps[i].y, eps[i].x) < std::pair(eps[j].y, eps[j].x);
  });
  const double cap2 = max_dist * max_dist;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    std::size_t best = eps.size();
    double best_d2 = 0.0;
    for (const std::size_t j : order) {
      if (j == i) continue;
      const double ddx = static_cast<double>(eps[j].x - eps[i].x);
      const double ddy = static_cast<double>(eps[j].y - eps[i].y);
      const double d2 = ddx * ddx + ddy * ddy;
      if (d2 > cap2) continue;
      if (best == eps.size() || d2 < best_d2) {
        best = j;
        best_d2 = d2;
      }
    }
    if (best == eps.size()) continue;
    const std::pair<std::size_t, std::size_t> key{std::min(i, best), std::max(i, best)};
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    out.push_back({eps[i], eps[best], bresenham(eps[i], eps[best]), false});
  }
  return out;
}

namespace {

bool near_endpoint(const PatchLine& line, Index x, Index y) {
  const auto r2 = kEndpointExclusionRadius * kEndpointExclusionRadius;
  for (const Pixel& e : {line.a, line.b}) {
    const Index dx = x - e.x, dy = y - e.y;
    if (dx * dx + dy * dy <= r2) return true;
  }
  return false;
}

}  // namespace

std::int64_t connection_score(const BinaryMask& mask, const PatchLine& line) {
  std::vector<std::pair<Index, Index>> region;
  for (const Pixel& p : line.pixels) {
    for (Index dy = -1; dy <= 1; ++dy)
      for (Index dx = -1; dx <= 1; ++dx) {
        const Index x = p.x + dx, y = p.y + dy;
        if (x < 0 || y < 0 || x >= mask.cols() || y >= mask.rows() || near_endpoint(line, x, y)) continue;
        region.emplace_back(y, x);
      }
  }
  std::sort(region.begin(), region.end());
  region.erase(std::unique(region.begin(), region.end()), region.end());
  std::int64_t foreground = 0;
  for (const auto& [y, x] : region) foreground += mask(y, x);
  return static_cast<std::int64_t>(line.pixels.size()) - foreground;
}

bool validate_connection(const BinaryMask& mask, const PatchLine& line, int tau) {
  return connection_score(mask, line) >= tau;
}

BinaryMask patch_lines(const BinaryMask& mask, const PatchConfig& cfg, std::vector<PatchLine>& candidates) {
  require(cfg.max_dist >= 0.0, "patch_lines: max_dist must be >= 0");
  require(cfg.line_width >= 1, "patch_lines: line_width must be >= 1");
  candidates = propose_connections(detect_endpoints(thin(mask)), cfg.max_dist);
  BinaryMask out = mask;
  const int lo = -(cfg.line_width - 1) / 2, hi = cfg.line_width / 2;
  for (PatchLine& line : candidates) {
    line.valid = validate_connection(mask, line, cfg.tau);
    if (!line.valid) continue;
    for (const Pixel& p : line.pixels)
      for (int dy = lo; dy <= hi; ++dy)
        for (int dx = lo; dx <= hi; ++dx) {
          const Index x = p.x + dx, y = p.y + dy;
          if (x >= 0 && y >= 0 && x < out.cols() && y < out.rows()) out(y, x) = true;
        }
  }
  return out;
}

BinaryMask patch_lines(const BinaryMask& mask, const PatchConfig& cfg) {
  std::vector<PatchLine> candidates;
  return patch_lines(mask, cfg, candidates);
}

BinaryMask corrupt_mask(const BinaryMask& gt, std::uint64_t seed, int n_clusters, int radius_min, int radius_max) {
  require(n_clusters >= 0, "corrupt_mask: n_clusters must be >= 0");
  require(radius_min >= 0 && radius_min <= radius_max, "corrupt_mask: radius range is empty");
  BinaryMask out = gt;
  std::vector<Pixel> background;
  for (Index y = 0; y < gt.rows(); ++y)
    for (Index x = 0; x < gt.cols(); ++x)
      if (!gt(y, x)) background.push_back({x, y});
  if (background.empty() || n_clusters == 0) return out;
  std::mt19937_64 rng(seed);
  const auto span = static_cast<std::uint64_t>(radius_max - radius_min + 1);
  for (int k = 0; k < n_clusters; ++k) {
    const Pixel c = background[uniform_index(rng, background.size())];
    const Index r = radius_min + static_cast<Index>(uniform_index(rng, span));
    for (Index dy = -r; dy <= r; ++dy)
      for (Index dx = -r; dx <= r; ++dx) {
        const Index x = c.x + dx, y = c.y + dy;
        if (dx * dx + dy * dy <= r * r && x >= 0 && y >= 0 && x < gt.cols() && y < gt.rows()) out(y, x) = true;
      }
  }
  return out;
}

}  // namespace casr
