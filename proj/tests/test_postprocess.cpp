#include <algorithm>
#include <cmath>
#include <numbers>

#include "casr/components.hpp"
#include "casr/error.hpp"
#include "casr/postprocess.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace casr;
using test::filled_rect;
using test::flood_fill_count;

namespace {

long count(const BinaryMask& m) { return static_cast<long>(m.count()); }

// Any 2x2 block that is entirely foreground.
bool has_full_block(const BinaryMask& m) {
  for (Eigen::Index y = 0; y + 1 < m.rows(); ++y)
    for (Eigen::Index x = 0; x + 1 < m.cols(); ++x)
      if (m(y, x) && m(y + 1, x) && m(y, x + 1) && m(y + 1, x + 1)) return true;
  return false;
}

int neighbors(const BinaryMask& m, Eigen::Index y, Eigen::Index x) {
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (!dy && !dx) continue;
      const Eigen::Index yy = y + dy, xx = x + dx;
      if (yy >= 0 && xx >= 0 && yy < m.rows() && xx < m.cols()) n += m(yy, xx);
    }
  return n;
}

// Two horizontal 3-px bars on one row band separated by `gap` background columns.
BinaryMask broken_bar(int gap) {
  // Bars much longer than the gap, so each end's nearest partner lies across it.
  BinaryMask m = BinaryMask::Zero(32, 68 + gap);
  m.block(10, 4, 3, 30) = true;
  m.block(10, 34 + gap, 3, 30) = true;
  return m;
}

// Brute-force D statistic.
std::int64_t score_oracle(const BinaryMask& mask, const PatchLine& line) {
  auto excluded = [&](Eigen::Index x, Eigen::Index y) {
    return std::hypot(double(x - line.a.x), double(y - line.a.y)) <= 2.0 ||
           std::hypot(double(x - line.b.x), double(y - line.b.y)) <= 2.0;
  };
  std::int64_t fg = 0;
  for (Eigen::Index y = 0; y < mask.rows(); ++y)
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      if (!mask(y, x) || excluded(x, y)) continue;
      const bool in_band = std::any_of(line.pixels.begin(), line.pixels.end(), [&](const Pixel& p) {
        return std::abs(p.x - x) <= 1 && std::abs(p.y - y) <= 1;
      });
      fg += in_band;
    }
  return static_cast<std::int64_t>(line.pixels.size()) - fg;
}

PatchLine make_line(Pixel a, Pixel b) { return {a, b, bresenham(a, b), false}; }

}  // namespace

TEST_SUITE("postprocess") {
  TEST_CASE("components of simple fixtures") {
    BinaryMask m = BinaryMask::Zero(10, 10);
    m.block(0, 0, 3, 3) = true;
    m.block(5, 5, 3, 3) = true;
    const ComponentSet cs = connected_components(m);
    REQUIRE(cs.count() == 2);
    CHECK(cs.areas == std::vector<std::int64_t>{9, 9});
    CHECK(cs.labels(0, 0) == 1);
    CHECK(cs.labels(7, 7) == 2);
    CHECK(cs.boxes[1].x0 == 5);
    CHECK(cs.boxes[1].y1 == 7);
    CHECK(connected_components(BinaryMask::Zero(6, 6)).count() == 0);

    BinaryMask diag = BinaryMask::Zero(3, 3);
    diag(0, 0) = diag(1, 1) = diag(2, 2) = true;
    CHECK(count_components(diag, 8) == 1);
    CHECK(count_components(diag, 4) == 3);
  }

  TEST_CASE("components agree with flood fill") {
    std::mt19937_64 rng(500);
    for (int t = 0; t < 500; ++t) {
      const BinaryMask m = test::random_mask(5 + t % 17, 4 + t % 13, uniform_real(rng, 0.1, 0.7), rng);
      for (int conn : {4, 8}) {
        const ComponentSet cs = connected_components(m, conn);
        CHECK(cs.count() == flood_fill_count(m, conn));
        std::int64_t sum = 0;
        for (auto a : cs.areas) sum += a;
        CHECK(sum == count(m));
        // Labels appear in row-major order of first pixel.
        int next = 1;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
          const int l = cs.labels.data()[i];
          CHECK((l == 0) == !m.data()[i]);
          if (l == next) ++next;
          CHECK(l < next);
        }
      }
    }
  }

  TEST_CASE("contour refinement removes specks only") {
    BinaryMask m = filled_rect(64, 64, 30, 7, 4, 50);  // 200 px
    m.block(40, 7, 4, 50) = true;                     // 400 px with a separate second band
    m.block(34, 7, 6, 2) = true;                      // join the two bands
    const BinaryMask vessel = m;
    const std::vector<std::pair<int, int>> specks{{2, 2}, {2, 40}, {55, 3}, {55, 50}, {20, 30}};
    for (auto [y, x] : specks) {
      m.block(y, x, 1, 5) = true;  // 5-px specks
    }
    CHECK(flood_fill_count(m) == 6);
    const BinaryMask r = contour_refine(m, 20);
    CHECK((r == vessel).all());
    CHECK((contour_refine(m, 0) == m).all());
    CHECK_THROWS_AS(contour_refine(m, -1), ContractError);
  }

  TEST_CASE("contour refinement properties") {
    std::mt19937_64 rng(33);
    for (int t = 0; t < 100; ++t) {
      const BinaryMask m = test::random_mask(24, 24, 0.35, rng);
      const auto thr = static_cast<std::int64_t>(uniform_index(rng, 12));
      const BinaryMask r = contour_refine(m, thr);
      CHECK((r <= m).all());
      CHECK((contour_refine(r, thr) == r).all());
      for (auto a : connected_components(r).areas) CHECK(a >= thr);
      // Surviving components are untouched.
      const ComponentSet cs = connected_components(m);
      for (Eigen::Index i = 0; i < m.size(); ++i)
        if (m.data()[i]) CHECK(r.data()[i] == (cs.areas[cs.labels.data()[i] - 1] >= thr));
    }
  }

  TEST_CASE("thinning a bar gives its centerline") {
    const BinaryMask bar = filled_rect(9, 26, 3, 3, 3, 20);
    const Skeleton s = thin(bar);
    CHECK((s.row(4).count() >= 17));
    CHECK((s.row(4).count() <= 20));
    CHECK(count(s) == static_cast<long>(s.row(4).count()));
    CHECK(flood_fill_count(s) == 1);
    CHECK(!has_full_block(s));
  }

  TEST_CASE("thin lines are fixpoints") {
    BinaryMask line = BinaryMask::Zero(8, 20);
    line.row(3).segment(2, 15) = true;
    CHECK((thin(line) == line).all());
    BinaryMask diag = BinaryMask::Zero(12, 12);
    for (int i = 1; i < 11; ++i) diag(i, i) = true;
    CHECK((thin(diag) == diag).all());
  }

  TEST_CASE("skeleton invariants on random masks") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 500; ++t) {
      const BinaryMask m = test::random_mask(6 + t % 19, 6 + t % 23, uniform_real(rng, 0.2, 0.8), rng);
      const Skeleton s = thin(m);
      CHECK((s <= m).all());
      CHECK(!has_full_block(s));
      CHECK(flood_fill_count(s) == flood_fill_count(m));
    }
  }

  TEST_CASE("endpoints of simple skeletons") {
    BinaryMask line = BinaryMask::Zero(5, 10);
    line.row(2).segment(1, 6) = true;
    const EndpointSet e = detect_endpoints(line);
    REQUIRE(e.size() == 2);
    CHECK(e[0] == Pixel{1, 2});
    CHECK(e[1] == Pixel{6, 2});

    BinaryMask ring = BinaryMask::Zero(7, 7);
    ring.block(1, 1, 5, 5) = true;
    ring.block(2, 2, 3, 3) = false;
    CHECK(detect_endpoints(ring).empty());

    // Y: stem going down from a junction, two arms going up-left and up-right.
    BinaryMask y = BinaryMask::Zero(12, 12);
    for (int i = 0; i < 4; ++i) {
      y(6 + i, 6) = true;          // stem
      y(5 - i, 5 - i) = true;      // left arm
      y(5 - i, 7 + i) = true;      // right arm
    }
    int hand = 0;
    for (Eigen::Index r = 0; r < 12; ++r)
      for (Eigen::Index c = 0; c < 12; ++c) hand += y(r, c) && neighbors(y, r, c) == 1;
    CHECK(hand == 3);
    CHECK(detect_endpoints(y).size() == 3);

    BinaryMask lone = BinaryMask::Zero(3, 3);
    lone(1, 1) = true;
    CHECK(detect_endpoints(lone).empty());
  }

  TEST_CASE("bresenham rasters are 8-connected and inclusive") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 200; ++t) {
      const Pixel a{static_cast<Eigen::Index>(uniform_index(rng, 30)), static_cast<Eigen::Index>(uniform_index(rng, 30))};
      const Pixel b{static_cast<Eigen::Index>(uniform_index(rng, 30)), static_cast<Eigen::Index>(uniform_index(rng, 30))};
      const auto px = bresenham(a, b);
      CHECK(px.front() == a);
      CHECK(px.back() == b);
      CHECK(static_cast<Eigen::Index>(px.size()) == std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) + 1);
      for (std::size_t i = 1; i < px.size(); ++i)
        CHECK(std::max(std::abs(px[i].x - px[i - 1].x), std::abs(px[i].y - px[i - 1].y)) == 1);
    }
  }

  TEST_CASE("proposing connections") {
    const auto one = propose_connections({{0, 0}, {5, 0}}, 10);
    REQUIRE(one.size() == 1);
    CHECK(one[0].length() == 6);
    CHECK(propose_connections({{3, 3}}, 10).empty());
    CHECK(propose_connections({{0, 0}, {20, 0}, {0, 20}}, 10).empty());

    // (8,8) is equidistant from (8,3) and (3,8), whose own nearest points lie
    // elsewhere; the row-major-first partner (8,3) wins.
    const auto tie = propose_connections({{8, 3}, {3, 8}, {8, 8}, {9, 1}, {1, 9}}, 6);
    bool has_first = false, has_second = false;
    for (const auto& l : tie) {
      const bool touches_center = l.a == Pixel{8, 8} || l.b == Pixel{8, 8};
      has_first |= touches_center && (l.a == Pixel{8, 3} || l.b == Pixel{8, 3});
      has_second |= touches_center && (l.a == Pixel{3, 8} || l.b == Pixel{3, 8});
    }
    CHECK(has_first);
    CHECK(!has_second);

    // Mutual nearest neighbors appear once.
    CHECK(propose_connections({{0, 0}, {3, 0}, {30, 0}, {33, 0}}, 5).size() == 2);
  }

  TEST_CASE("validating connections") {
    const BinaryMask gap = broken_bar(8);
    const PatchLine across = make_line({33, 11}, {42, 11});
    CHECK(connection_score(gap, across) == score_oracle(gap, across));
    CHECK(connection_score(gap, across) == across.length());  // empty region
    CHECK(validate_connection(gap, across, 3));

    const BinaryMask solid = filled_rect(32, 60, 8, 4, 7, 50);
    const PatchLine inside = make_line({10, 11}, {30, 11});
    CHECK(connection_score(solid, inside) <= 0);
    CHECK(!validate_connection(solid, inside, 3));

    const BinaryMask empty = BinaryMask::Zero(20, 20);
    CHECK(validate_connection(empty, make_line({2, 2}, {15, 9}), 0));

    std::mt19937_64 rng(12);
    for (int t = 0; t < 100; ++t) {
      const BinaryMask m = test::random_mask(24, 24, 0.3, rng);
      const PatchLine l = make_line({static_cast<Eigen::Index>(uniform_index(rng, 24)), static_cast<Eigen::Index>(uniform_index(rng, 24))},
                                    {static_cast<Eigen::Index>(uniform_index(rng, 24)), static_cast<Eigen::Index>(uniform_index(rng, 24))});
      CHECK(connection_score(m, l) == score_oracle(m, l));
    }
  }

  TEST_CASE("patching a single gap joins the pieces") {
    const BinaryMask m = broken_bar(10);
    REQUIRE(flood_fill_count(m) == 2);
    const BinaryMask p = patch_lines(m);
    CHECK(flood_fill_count(p) == 1);
    CHECK((m <= p).all());
  }

  TEST_CASE("intact vessels are left alone") {
    CHECK((patch_lines(filled_rect(32, 60, 10, 4, 3, 50)) == filled_rect(32, 60, 10, 4, 3, 50)).all());
    BinaryMask bend = filled_rect(40, 40, 5, 5, 3, 25);
    bend.block(5, 27, 25, 3) = true;
    CHECK((patch_lines(bend) == bend).all());
  }

  TEST_CASE("patching is monotone and never adds components") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 100; ++t) {
      const BinaryMask m = test::random_mask(28, 28, 0.15, rng);
      const BinaryMask p = patch_lines(m);
      CHECK((m <= p).all());
      CHECK(flood_fill_count(p) <= flood_fill_count(m));
    }
  }

  TEST_CASE("mask corruption") {
    const BinaryMask gt = filled_rect(64, 64, 30, 5, 4, 54);
    CHECK((corrupt_mask(gt, 1, 0, 2, 4) == gt).all());
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const BinaryMask c = corrupt_mask(gt, seed, 5, 2, 4);
      CHECK((gt <= c).all());
      CHECK(flood_fill_count(c) - flood_fill_count(gt) <= 5);
      CHECK(count(c) - count(gt) <= static_cast<long>(5 * std::numbers::pi * 16 + 5 * 8));
      CHECK((corrupt_mask(gt, seed, 5, 2, 4) == c).all());
    }
    CHECK_THROWS_AS(corrupt_mask(gt, 1, 3, 5, 4), ContractError);
  }
}
