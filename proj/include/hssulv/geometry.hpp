#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace hssulv {

using Index = std::ptrdiff_t;
using Point = std::array<double, 2>;

/// Half-open contiguous index range [begin, begin + size).
struct IndexRange {
  Index begin = 0;
  Index size = 0;

  Index end() const { return begin + size; }
  bool contains(Index i) const { return i >= begin && i < end(); }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Ordered 2D points plus a balanced binary index tree over them.
///
/// Node (level, i) owns the contiguous range [i * N / 2^level, (i + 1) * N / 2^level).
/// Leaves live at max_level() and hold nleaf() points each. Because the points are
/// ordered by recursive coordinate bisection, every node range is a spatial cell.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::vector<Point> points);

  Index size() const { return static_cast<Index>(points_.size()); }
  const std::vector<Point>& points() const { return points_; }
  const Point& operator[](Index i) const { return points_[static_cast<std::size_t>(i)]; }

  Index nleaf() const { return nleaf_; }
  int max_level() const { return max_level_; }

  /// Same points, with a tree whose leaves hold `nleaf` points.
  /// Throws std::invalid_argument unless N == nleaf * 2^L for some L >= 0.
  PointSet with_leaf_size(Index nleaf) const;

  Index node_count(int level) const { return Index{1} << level; }
  IndexRange node_range(int level, Index node) const;

 private:
  std::vector<Point> points_;
  Index nleaf_ = 0;
  int max_level_ = 0;
};

/// Sizes accepted by generate_grid: perfect squares m^2 (m x m grid) and 2 m^2
/// (2m x m grid with the same spacing along both axes).
bool is_valid_grid_size(Index n);

/// Uniform grid on [0, side] along x, ordered by recursive coordinate bisection
/// (split the longer axis at the median, recurse). The returned tree is a single
/// leaf; call PointSet::with_leaf_size to request a deeper tree.
PointSet generate_grid(Index n, double side = 1.0);

/// Recursive coordinate bisection ordering of arbitrary points. Returns the
/// permutation: result[k] is the original index of the k-th ordered point.
std::vector<Index> bisection_order(const std::vector<Point>& points);

}  // namespace hssulv
