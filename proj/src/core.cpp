#include "ppcalib/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ppcalib {

Window::Window(double x_min, double x_max, double y_min, double y_max)
    : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw std::invalid_argument("window requires x_min < x_max and y_min < y_max");
  }
  if (!std::isfinite(area())) {
    throw std::invalid_argument("window must have finite area");
  }
}

PointPattern::PointPattern(Window window, std::vector<Point> points)
    : window_(window), points_(std::move(points)) {
  for (const auto& p : points_) {
    if (!window_.contains(p)) {
      throw std::invalid_argument("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                  ") lies outside the window");
    }
  }
}

PointPattern PointPattern::with_point(Point u) const {
  auto pts = points_;
  pts.push_back(u);
  return PointPattern(window_, std::move(pts));
}

PointPattern PointPattern::without_point(std::size_t i) const {
  if (i >= points_.size()) throw std::out_of_range("point index out of range");
  auto pts = points_;
  pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
  return PointPattern(window_, std::move(pts));
}

PixelGrid::PixelGrid(Window window, std::size_t nx, std::size_t ny)
    : window_(window), nx_(nx), ny_(ny) {
  if (nx == 0 || ny == 0) throw std::invalid_argument("pixel grid needs nx, ny >= 1");
}

namespace {

std::size_t axis_index(double v, double lo, double extent, std::size_t n) {
  const double t = (v - lo) / extent * static_cast<double>(n);
  if (t <= 0.0) return 0;
  const auto i = static_cast<std::size_t>(std::floor(t));
  return std::min(i, n - 1);
}

}  // namespace

std::size_t PixelGrid::pixel_of(Point p) const {
  const std::size_t ix = axis_index(p.x, window_.x_min(), window_.width(), nx_);
  const std::size_t iy = axis_index(p.y, window_.y_min(), window_.height(), ny_);
  return iy * nx_ + ix;
}

Window PixelGrid::pixel(std::size_t s) const {
  if (s >= size()) throw std::out_of_range("pixel index out of range");
  const double ix = static_cast<double>(x_index(s));
  const double iy = static_cast<double>(y_index(s));
  const double w = pixel_width();
  const double h = pixel_height();
  // The last column/row take the window edge verbatim to avoid rounding gaps.
  const double x1 = x_index(s) + 1 == nx_ ? window_.x_max() : window_.x_min() + (ix + 1) * w;
  const double y1 = y_index(s) + 1 == ny_ ? window_.y_max() : window_.y_min() + (iy + 1) * h;
  return {window_.x_min() + ix * w, x1, window_.y_min() + iy * h, y1};
}

std::int64_t CountVector::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

CountVector pixel_counts(const PointPattern& pattern, const PixelGrid& grid) {
  if (!(pattern.window() == grid.window())) {
    throw std::invalid_argument("pattern window does not match pixel grid window");
  }
  CountVector out{std::vector<std::int64_t>(grid.size(), 0), grid};
  for (const auto& p : pattern.points()) ++out.counts[grid.pixel_of(p)];
  return out;
}

BucketGrid::BucketGrid(const Window& window, double radius)
    : radius_(radius), r2_(radius * radius), x_min_(window.x_min()), y_min_(window.y_min()) {
  if (!(radius > 0.0)) throw std::invalid_argument("neighbour radius must be positive");
  // Cap the cell count so tiny radii on large windows stay bounded in memory.
  constexpr double kMaxCellsPerAxis = 1024.0;
  ncx_ = static_cast<std::size_t>(std::clamp(std::floor(window.width() / radius), 1.0, kMaxCellsPerAxis));
  ncy_ = static_cast<std::size_t>(std::clamp(std::floor(window.height() / radius), 1.0, kMaxCellsPerAxis));
  cell_w_ = window.width() / static_cast<double>(ncx_);
  cell_h_ = window.height() / static_cast<double>(ncy_);
  cells_.resize(ncx_ * ncy_);
}

std::pair<std::size_t, std::size_t> BucketGrid::cell_coords(Point p) const {
  const double tx = (p.x - x_min_) / cell_w_;
  const double ty = (p.y - y_min_) / cell_h_;
  const auto cx = tx <= 0.0 ? std::size_t{0} : std::min(static_cast<std::size_t>(tx), ncx_ - 1);
  const auto cy = ty <= 0.0 ? std::size_t{0} : std::min(static_cast<std::size_t>(ty), ncy_ - 1);
  return {cx, cy};
}

std::vector<std::uint32_t>& BucketGrid::cell_of(Point p) {
  const auto [cx, cy] = cell_coords(p);
  return cells_[cy * ncx_ + cx];
}

void BucketGrid::insert(std::uint32_t id, Point p) { cell_of(p).push_back(id); }

void BucketGrid::erase(std::uint32_t id, Point p) {
  auto& cell = cell_of(p);
  const auto it = std::find(cell.begin(), cell.end(), id);
  if (it == cell.end()) throw std::logic_error("bucket grid: id not found");
  *it = cell.back();
  cell.pop_back();
}

void BucketGrid::relabel(std::uint32_t old_id, std::uint32_t new_id, Point p) {
  auto& cell = cell_of(p);
  const auto it = std::find(cell.begin(), cell.end(), old_id);
  if (it == cell.end()) throw std::logic_error("bucket grid: id not found");
  *it = new_id;
}

NeighborIndex::NeighborIndex(const Window& window, std::span<const Point> points, double radius)
    : points_(points), grid_(window, radius) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    grid_.insert(static_cast<std::uint32_t>(i), points[i]);
  }
}

std::size_t NeighborIndex::count_within(Point u) const {
  std::size_t n = 0;
  for_each_within(u, [&](std::uint32_t) { ++n; });
  return n;
}

std::vector<std::size_t> neighbor_counts(const PointPattern& pattern, double r) {
  const NeighborIndex index(pattern.window(), pattern.points(), r);
  std::vector<std::size_t> out(pattern.size(), 0);
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    index.for_each_within(pattern[i], [&](std::uint32_t j) {
      if (j != i) ++out[i];
    });
  }
  return out;
}

std::size_t pair_count(const PointPattern& pattern, double r) {
  const auto counts = neighbor_counts(pattern, r);
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0}) / 2;
}

double saturation_statistic(const PointPattern& pattern, double r, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("saturation threshold must be nonnegative");
  double s = 0.0;
  for (const auto c : neighbor_counts(pattern, r)) s += std::min(alpha, static_cast<double>(c));
  return s;
}

}  // namespace ppcalib
