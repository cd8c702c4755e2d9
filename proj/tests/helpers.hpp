#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "casr/image.hpp"
#include "casr/random.hpp"

namespace casr::test {

/// Fresh scratch directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("casr_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline GrayImage random_gray(Eigen::Index h, Eigen::Index w, std::mt19937_64& rng) {
  GrayImage img(h, w);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<std::uint8_t>(uniform_index(rng, 256));
  return img;
}

inline BinaryMask random_mask(Eigen::Index h, Eigen::Index w, double density, std::mt19937_64& rng) {
  BinaryMask m(h, w);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_real(rng, 0.0, 1.0) < density;
  return m;
}

inline BinaryMask filled_rect(Eigen::Index h, Eigen::Index w, Eigen::Index y0, Eigen::Index x0, Eigen::Index rh,
                              Eigen::Index rw) {
  BinaryMask m = BinaryMask::Zero(h, w);
  m.block(y0, x0, rh, rw) = true;
  return m;
}

/// Reference 8- or 4-connected component count by explicit stack flood fill.
inline int flood_fill_count(const BinaryMask& m, int connectivity = 8) {
  BinaryMask seen = BinaryMask::Zero(m.rows(), m.cols());
  int count = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  for (Eigen::Index y = 0; y < m.rows(); ++y)
    for (Eigen::Index x = 0; x < m.cols(); ++x) {
      if (!m(y, x) || seen(y, x)) continue;
      ++count;
      stack.push_back({y, x});
      seen(y, x) = true;
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            if (connectivity == 4 && dy != 0 && dx != 0) continue;
            const Eigen::Index ny = cy + dy, nx = cx + dx;
            if (ny < 0 || nx < 0 || ny >= m.rows() || nx >= m.cols()) continue;
            if (m(ny, nx) && !seen(ny, nx)) {
              seen(ny, nx) = true;
              stack.push_back({ny, nx});
            }
          }
      }
    }
  return count;
}

/// Plain clipped histogram equalization of a single tile, evaluated for one
/// level from integer counts: clip = factor * n / 256, the clipped excess is
/// spread evenly, and the level maps to round(255 * cdf / n).
inline int clipped_equalization(const Eigen::Ref<const GrayImage>& tile, double clip_factor, int level) {
  std::vector<long> count(256, 0);
  for (Eigen::Index y = 0; y < tile.rows(); ++y)
    for (Eigen::Index x = 0; x < tile.cols(); ++x) ++count[tile(y, x)];
  const auto n = static_cast<double>(tile.size());
  const double clip = clip_factor * n / 256.0;
  double excess = 0.0, kept_le = 0.0;
  for (int v = 0; v < 256; ++v) {
    const auto c = static_cast<double>(count[v]);
    excess += c > clip ? c - clip : 0.0;
    if (v <= level) kept_le += c > clip ? clip : c;
  }
  const double cdf = kept_le + excess * (level + 1) / 256.0;
  return static_cast<int>(std::lround(255.0 * cdf / n));
}

}  // namespace casr::test
