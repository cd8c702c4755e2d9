#include "casr/components.hpp"

#include <numeric>

#include "casr/error.hpp"

namespace casr {

namespace {

struct DisjointSet {
  std::vector<std::int32_t> parent;

  std::int32_t make() {
    parent.push_back(static_cast<std::int32_t>(parent.size()));
    return parent.back();
  }
  std::int32_t find(std::int32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Keep the smaller (earlier) provisional label as root.
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace

ComponentSet connected_components(const BinaryMask& mask, int connectivity) {
  require(connectivity == 4 || connectivity == 8, "connected_components: connectivity must be 4 or 8");
  const auto h = mask.rows();
  const auto w = mask.cols();
  Plane<std::int32_t> provisional = Plane<std::int32_t>::Constant(h, w, -1);
  DisjointSet sets;

  // First pass: provisional labels from the already-visited causal neighbors.
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      std::int32_t label = -1;
      auto visit = [&](Eigen::Index yy, Eigen::Index xx) {
        if (yy < 0 || xx < 0 || xx >= w) return;
        const auto n = provisional(yy, xx);
        if (n < 0) return;
        if (label < 0) {
          label = n;
        } else {
          sets.unite(label, n);
        }
      };
      visit(y, x - 1);
      visit(y - 1, x);
      if (connectivity == 8) {
        visit(y - 1, x - 1);
        visit(y - 1, x + 1);
      }
      provisional(y, x) = label < 0 ? sets.make() : label;
    }
  }

  // Second pass: resolve roots and renumber in row-major order of first appearance.
  ComponentSet out;
  out.labels = Plane<std::int32_t>::Zero(h, w);
  std::vector<std::int32_t> final_label(sets.parent.size(), 0);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const auto p = provisional(y, x);
      if (p < 0) continue;
      const auto root = sets.find(p);
      if (final_label[root] == 0) {
        out.areas.push_back(0);
        out.boxes.push_back({x, y, x, y});
        final_label[root] = static_cast<std::int32_t>(out.areas.size());
      }
      const auto k = final_label[root];
      out.labels(y, x) = k;
      ++out.areas[k - 1];
      auto& box = out.boxes[k - 1];
      box.x0 = std::min(box.x0, x);
      box.x1 = std::max(box.x1, x);
      box.y1 = std::max(box.y1, y);
    }
  }
  return out;
}

}  // namespace casr
