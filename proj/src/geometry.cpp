#include "hssulv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hssulv {

namespace {

Index isqrt(Index n) {
  auto r = static_cast<Index>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

bool is_square(Index n) {
  const Index r = isqrt(n);
  return r * r == n;
}

void bisect(const std::vector<Point>& pts, std::vector<Index>& order, std::size_t lo,
            std::size_t hi) {
  if (hi - lo < 2) return;
  double xmin = pts[order[lo]][0], xmax = xmin;
  double ymin = pts[order[lo]][1], ymax = ymin;
  for (std::size_t k = lo; k < hi; ++k) {
    const auto& p = pts[order[k]];
    xmin = std::min(xmin, p[0]);
    xmax = std::max(xmax, p[0]);
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  const int axis = (ymax - ymin) > (xmax - xmin) ? 1 : 0;
  const int other = 1 - axis;
  const auto first = order.begin() + static_cast<std::ptrdiff_t>(lo);
  const auto last = order.begin() + static_cast<std::ptrdiff_t>(hi);
  std::sort(first, last, [&](Index a, Index b) {
    const auto& pa = pts[a];
    const auto& pb = pts[b];
    if (pa[axis] != pb[axis]) return pa[axis] < pb[axis];
    if (pa[other] != pb[other]) return pa[other] < pb[other];
    return a < b;
  });
  const std::size_t mid = lo + (hi - lo) / 2;
  bisect(pts, order, lo, mid);
  bisect(pts, order, mid, hi);
}

}  // namespace

PointSet::PointSet(std::vector<Point> points)
    : points_(std::move(points)), nleaf_(static_cast<Index>(points_.size())) {}

PointSet PointSet::with_leaf_size(Index nleaf) const {
  if (nleaf <= 0 || size() % nleaf != 0) {
    std::ostringstream msg;
    msg << "leaf size " << nleaf << " does not divide N = " << size();
    throw std::invalid_argument(msg.str());
  }
  Index blocks = size() / nleaf;
  int levels = 0;
  while (blocks > 1 && blocks % 2 == 0) {
    blocks /= 2;
    ++levels;
  }
  if (blocks != 1) {
    std::ostringstream msg;
    msg << "N = " << size() << " is not nleaf * 2^L for nleaf = " << nleaf;
    throw std::invalid_argument(msg.str());
  }
  PointSet out = *this;
  out.nleaf_ = nleaf;
  out.max_level_ = levels;
  return out;
}

IndexRange PointSet::node_range(int level, Index node) const {
  if (level < 0 || level > max_level_ || node < 0 || node >= node_count(level)) {
    throw std::out_of_range("node (" + std::to_string(level) + ", " + std::to_string(node) +
                            ") outside the index tree");
  }
  const Index len = size() >> level;
  return {node * len, len};
}

bool is_valid_grid_size(Index n) {
  if (n <= 0) return false;
  return is_square(n) || (n % 2 == 0 && is_square(n / 2));
}

std::vector<Index> bisection_order(const std::vector<Point>& points) {
  std::vector<Index> order(points.size());
  std::iota(order.begin(), order.end(), Index{0});
  bisect(points, order, 0, order.size());
  return order;
}

PointSet generate_grid(Index n, double side) {
  if (!(side > 0.0)) throw std::invalid_argument("grid side length must be positive");
  if (!is_valid_grid_size(n)) {
    Index below = n - 1;
    while (below > 0 && !is_valid_grid_size(below)) --below;
    Index above = std::max<Index>(n + 1, 1);
    while (!is_valid_grid_size(above)) ++above;
    std::ostringstream msg;
    msg << "N = " << n << " is not a grid size (m^2 or 2 m^2); nearest valid sizes are ";
    if (below > 0) msg << below << " and ";
    msg << above;
    throw std::invalid_argument(msg.str());
  }
  Index nx = 0;
  Index ny = 0;
  if (is_square(n)) {
    nx = ny = isqrt(n);
  } else {
    ny = isqrt(n / 2);
    nx = 2 * ny;
  }
  const double h = nx > 1 ? side / static_cast<double>(nx - 1) : 0.0;
  std::vector<Point> raw;
  raw.reserve(static_cast<std::size_t>(n));
  for (Index iy = 0; iy < ny; ++iy) {
    for (Index ix = 0; ix < nx; ++ix) {
      raw.push_back({static_cast<double>(ix) * h, static_cast<double>(iy) * h});
    }
  }
  const auto order = bisection_order(raw);
  std::vector<Point> sorted;
  sorted.reserve(raw.size());
  for (Index k : order) sorted.push_back(raw[static_cast<std::size_t>(k)]);
  return PointSet(std::move(sorted));
}

}  // namespace hssulv
