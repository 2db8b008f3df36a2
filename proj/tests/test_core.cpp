#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ppcalib/core.hpp"
#include "support.hpp"

using namespace ppcalib;

namespace {

std::size_t brute_pairs(std::span<const Point> pts, double r) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (std::sqrt(squared_distance(pts[i], pts[j])) <= r) ++n;
    }
  }
  return n;
}

double brute_saturation(std::span<const Point> pts, double r, double alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double c = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i != j && std::sqrt(squared_distance(pts[i], pts[j])) <= r) c += 1.0;
    }
    s += std::min(alpha, c);
  }
  return s;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("window validates and measures") {
    const Window w(0.0, 2.0, -1.0, 0.5);
    CHECK(w.area() == doctest::Approx(3.0));
    CHECK(w.contains({2.0, 0.5}));
    CHECK_FALSE(w.contains({2.0000001, 0.0}));
    CHECK_THROWS_AS(Window(1.0, 1.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Window(0.0, 1.0, 2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Window(0.0, NAN, 0.0, 1.0), std::invalid_argument);
  }

  TEST_CASE("pattern rejects points outside the window") {
    CHECK_THROWS_AS(PointPattern(Window::unit_square(), {{0.5, 1.5}}), std::invalid_argument);
    const PointPattern p(Window::unit_square(), {{0.1, 0.1}, {0.2, 0.2}});
    CHECK(p.with_point({0.3, 0.3}).size() == 3);
    CHECK(p.without_point(0)[0] == Point{0.2, 0.2});
  }

  TEST_CASE("pixel grid assigns every window point to one pixel") {
    const PixelGrid g(Window::unit_square(), 20, 20);
    CHECK(g.size() == 400);
    CHECK(g.pixel_of({0.0, 0.0}) == 0);
    CHECK(g.pixel_of({1.0, 1.0}) == 399);
    CHECK(g.pixel_of({0.05, 0.0}) == 1);       // left edge belongs to the right pixel
    CHECK(g.pixel_of({0.999, 0.051}) == 39);  // row 1, column 19
    const Window px = g.pixel(21);
    CHECK(px.x_min() == doctest::Approx(0.05));
    CHECK(px.y_min() == doctest::Approx(0.05));
    CHECK(g.x_index(21) == 1);
    CHECK(g.y_index(21) == 1);
  }

  TEST_CASE("pixel counts sum to the pattern size") {
    std::mt19937_64 gen(3);
    for (int rep = 0; rep < 20; ++rep) {
      const auto pts = test::uniform_points(gen, 1 + rep * 13, Window(0.0, 3.0, 1.0, 2.0));
      const PointPattern p(Window(0.0, 3.0, 1.0, 2.0), pts);
      const auto c = pixel_counts(p, PixelGrid(p.window(), 7, 5));
      CHECK(c.total() == static_cast<std::int64_t>(p.size()));
      CHECK(std::all_of(c.counts.begin(), c.counts.end(), [](auto k) { return k >= 0; }));
    }
  }

  TEST_CASE("pixel counts reject a grid over another window") {
    const PointPattern p(Window::unit_square(), {{0.5, 0.5}});
    CHECK_THROWS_AS(pixel_counts(p, PixelGrid(Window(0.0, 2.0, 0.0, 1.0), 2, 2)), std::invalid_argument);
  }

  TEST_CASE("pair count examples") {
    const Window w = Window::unit_square();
    CHECK(pair_count(PointPattern(w, {{0.1, 0.1}, {0.13, 0.1}}), 0.05) == 1);
    CHECK(pair_count(PointPattern(w, {{0.1, 0.1}, {0.16, 0.1}}), 0.05) == 0);
    CHECK(pair_count(PointPattern(w, {{0.1, 0.1}, {0.15, 0.1}}), 0.05) == 1);  // boundary distance counts
    CHECK(pair_count(PointPattern(w), 0.05) == 0);
    CHECK(pair_count(PointPattern(w, {{0.5, 0.5}}), 0.05) == 0);
    // Three mutually close points: three unordered pairs.
    CHECK(pair_count(PointPattern(w, {{0.5, 0.5}, {0.51, 0.5}, {0.5, 0.51}}), 0.05) == 3);
  }

  TEST_CASE("pair count and saturation statistic match brute force") {
    std::mt19937_64 gen(11);
    const Window w(0.0, 1.0, 0.0, 2.0);
    for (int rep = 0; rep < 30; ++rep) {
      const auto pts = test::uniform_points(gen, 50 + 10 * rep, w);
      const PointPattern p(w, pts);
      for (const double r : {0.01, 0.05, 0.2}) {
        CHECK(pair_count(p, r) == brute_pairs(pts, r));
        for (const double alpha : {0.0, 1.0, 2.5, 4.5, 1e9}) {
          CHECK(saturation_statistic(p, r, alpha) == doctest::Approx(brute_saturation(pts, r, alpha)));
        }
      }
    }
  }

  TEST_CASE("interaction statistics are permutation invariant") {
    std::mt19937_64 gen(5);
    auto pts = test::uniform_points(gen, 200, Window::unit_square());
    const double s = saturation_statistic(PointPattern(Window::unit_square(), pts), 0.05, 4.5);
    const auto pc = pair_count(PointPattern(Window::unit_square(), pts), 0.05);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(pts.begin(), pts.end(), gen);
      const PointPattern q(Window::unit_square(), pts);
      CHECK(saturation_statistic(q, 0.05, 4.5) == s);
      CHECK(pair_count(q, 0.05) == pc);
    }
  }

  TEST_CASE("saturation limits") {
    std::mt19937_64 gen(8);
    const PointPattern p(Window::unit_square(), test::uniform_points(gen, 300, Window::unit_square()));
    // alpha = 0 gives 0; unbounded alpha gives twice the pair count.
    CHECK(saturation_statistic(p, 0.05, 0.0) == 0.0);
    CHECK(saturation_statistic(p, 0.05, 1e12) == doctest::Approx(2.0 * static_cast<double>(pair_count(p, 0.05))));
    const auto nc = neighbor_counts(p, 0.05);
    std::size_t total = 0;
    for (const auto c : nc) total += c;
    CHECK(total == 2 * pair_count(p, 0.05));
    CHECK_THROWS_AS(saturation_statistic(p, 0.05, -1.0), std::invalid_argument);
  }

  TEST_CASE("bucket grid supports removal and relabelling") {
    std::vector<Point> pts{{0.1, 0.1}, {0.12, 0.1}, {0.9, 0.9}};
    BucketGrid g(Window::unit_square(), 0.05);
    for (std::uint32_t i = 0; i < pts.size(); ++i) g.insert(i, pts[i]);
    auto count = [&](Point u) {
      std::size_t n = 0;
      g.for_each_within(u, pts, [&](std::uint32_t) { ++n; });
      return n;
    };
    CHECK(count({0.11, 0.1}) == 2);
    g.erase(0, pts[0]);
    CHECK(count({0.11, 0.1}) == 1);
    // Move point 2 into slot 0.
    g.relabel(2, 0, pts[2]);
    pts[0] = pts[2];
    pts.pop_back();
    CHECK(count({0.9, 0.9}) == 1);
  }
}
