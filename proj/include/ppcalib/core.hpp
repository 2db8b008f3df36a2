#ifndef PPCALIB_CORE_HPP
#define PPCALIB_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ppcalib {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double squared_distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Axis-aligned rectangular observation window. Closed on all sides.
class Window {
 public:
  Window(double x_min, double x_max, double y_min, double y_max);

  static Window unit_square() { return {0.0, 1.0, 0.0, 1.0}; }

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }

  bool contains(Point p) const {
    return p.x >= x_min_ && p.x <= x_max_ && p.y >= y_min_ && p.y <= y_max_;
  }

  friend bool operator==(const Window&, const Window&) = default;

 private:
  double x_min_;
  double x_max_;
  double y_min_;
  double y_max_;
};

/// A finite configuration of points observed in a window. Every point lies
/// inside the window (boundary inclusive); duplicates are allowed.
class PointPattern {
 public:
  explicit PointPattern(Window window, std::vector<Point> points = {});

  const Window& window() const { return window_; }
  std::span<const Point> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }

  PointPattern with_point(Point u) const;
  PointPattern without_point(std::size_t i) const;

  friend bool operator==(const PointPattern&, const PointPattern&) = default;

 private:
  Window window_;
  std::vector<Point> points_;
};

/// Partition of a window into nx * ny equal pixels.
///
/// Pixel s = iy * nx + ix covers [x_lo, x_hi) x [y_lo, y_hi), except that the
/// last column and last row are closed on their right and top edges, so every
/// point of the window belongs to exactly one pixel.
class PixelGrid {
 public:
  PixelGrid(Window window, std::size_t nx, std::size_t ny);

  const Window& window() const { return window_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  double pixel_width() const { return window_.width() / static_cast<double>(nx_); }
  double pixel_height() const { return window_.height() / static_cast<double>(ny_); }
  double pixel_area() const { return window_.area() / static_cast<double>(size()); }

  std::size_t x_index(std::size_t s) const { return s % nx_; }
  std::size_t y_index(std::size_t s) const { return s / nx_; }

  /// Index of the pixel containing p. p must lie inside the window.
  std::size_t pixel_of(Point p) const;
  Window pixel(std::size_t s) const;

  friend bool operator==(const PixelGrid&, const PixelGrid&) = default;

 private:
  Window window_;
  std::size_t nx_;
  std::size_t ny_;
};

struct CountVector {
  std::vector<std::int64_t> counts;
  PixelGrid grid;

  std::int64_t total() const;
};

CountVector pixel_counts(const PointPattern& pattern, const PixelGrid& grid);

/// Uniform bucket grid over a window with cells at least `radius` wide. All
/// fixed-radius neighbour searches in the library go through
/// `for_each_within`. Supports insertion and removal of indexed points.
class BucketGrid {
 public:
  BucketGrid(const Window& window, double radius);

  void insert(std::uint32_t id, Point p);
  /// Removes `id`, which must have been inserted at `p`.
  void erase(std::uint32_t id, Point p);
  /// Re-labels an entry; used when a point is moved to another slot of the
  /// owning container.
  void relabel(std::uint32_t old_id, std::uint32_t new_id, Point p);

  /// Calls fn(id) for every stored id whose point is within `radius`
  /// (inclusive) of u. `points` maps ids to coordinates.
  template <class Fn>
  void for_each_within(Point u, std::span<const Point> points, Fn&& fn) const {
    const auto [cx, cy] = cell_coords(u);
    const std::size_t x0 = cx > 0 ? cx - 1 : 0;
    const std::size_t y0 = cy > 0 ? cy - 1 : 0;
    const std::size_t x1 = cx + 1 < ncx_ ? cx + 1 : ncx_ - 1;
    const std::size_t y1 = cy + 1 < ncy_ ? cy + 1 : ncy_ - 1;
    for (std::size_t y = y0; y <= y1; ++y) {
      for (std::size_t x = x0; x <= x1; ++x) {
        for (const std::uint32_t id : cells_[y * ncx_ + x]) {
          if (squared_distance(points[id], u) <= r2_) fn(id);
        }
      }
    }
  }

  double radius() const { return radius_; }

 private:
  std::pair<std::size_t, std::size_t> cell_coords(Point p) const;
  std::vector<std::uint32_t>& cell_of(Point p);

  double radius_;
  double r2_;
  double x_min_;
  double y_min_;
  double cell_w_;
  double cell_h_;
  std::size_t ncx_;
  std::size_t ncy_;
  std::vector<std::vector<std::uint32_t>> cells_;
};

/// Static neighbour index over a fixed set of points.
class NeighborIndex {
 public:
  NeighborIndex(const Window& window, std::span<const Point> points, double radius);

  template <class Fn>
  void for_each_within(Point u, Fn&& fn) const {
    grid_.for_each_within(u, points_, std::forward<Fn>(fn));
  }

  /// Number of indexed points within the radius of u.
  std::size_t count_within(Point u) const;

 private:
  std::span<const Point> points_;
  BucketGrid grid_;
};

/// Number of unordered pairs {i, j}, i != j, with distance <= r. A sum over
/// ordered pairs would double it, which is the same model with gamma squared.
std::size_t pair_count(const PointPattern& pattern, double r);

/// For each point, the number of other points within distance r.
std::vector<std::size_t> neighbor_counts(const PointPattern& pattern, double r);

/// Sum over points of min(alpha, number of r-close neighbours).
double saturation_statistic(const PointPattern& pattern, double r, double alpha);

}  // namespace ppcalib

#endif  // PPCALIB_CORE_HPP
