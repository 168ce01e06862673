#include "hssulv/hss.hpp"

#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hssulv {

BasisU BasisU::identity(Index n) {
  BasisU u;
  u.q = Matrix::Identity(n, n);
  u.redundant_dim = 0;
  u.skeleton_dim = n;
  return u;
}

BasisU build_shared_basis(Matrix row_block, Index max_rank) {
  if (row_block.cols() == 0 || row_block.rows() == 0) {
    throw std::invalid_argument("build_shared_basis: no admissible blocks to compress");
  }
  const Index n = row_block.rows();
  PivotedQr qr(std::move(row_block), max_rank);
  const Index k = qr.rank();
  const Matrix full = qr.full_q();
  BasisU u;
  u.q.resize(n, n);
  u.q.leftCols(n - k) = full.rightCols(n - k);
  u.q.rightCols(k) = full.leftCols(k);
  u.redundant_dim = n - k;
  u.skeleton_dim = k;
  return u;
}

BuildOptions BuildOptions::lossless(Index nleaf) {
  BuildOptions o;
  o.max_rank = nleaf;
  o.upper_max_rank = std::numeric_limits<Index>::max();
  return o;
}

const BasisU& HssMatrix::basis(int level, Index node) const {
  return bases.at(static_cast<std::size_t>(level)).at(static_cast<std::size_t>(node));
}

const Matrix& HssMatrix::coupling(int level, Index parent) const {
  return couplings.at(static_cast<std::size_t>(level)).at(static_cast<std::size_t>(parent));
}

IndexRange HssMatrix::range(int level, Index node) const {
  const Index len = n >> level;
  return {node * len, len};
}

namespace detail {

Matrix drop_columns(const Matrix& m, IndexRange skip) {
  Matrix out(m.rows(), m.cols() - skip.size);
  out.leftCols(skip.begin) = m.leftCols(skip.begin);
  out.rightCols(m.cols() - skip.end()) = m.rightCols(m.cols() - skip.end());
  return out;
}

LeafCompression compress_leaf(const KernelSpec& spec, const PointSet& ps, IndexRange rows,
                              Index max_rank, double diagonal_shift) {
  const Matrix row_full = dense_block(spec, ps, rows, {0, ps.size()});
  LeafCompression out;
  out.diag = row_full.middleCols(rows.begin, rows.size);
  if (diagonal_shift != 0.0) out.diag.diagonal().array() += diagonal_shift;
  out.basis = build_shared_basis(drop_columns(row_full, rows), max_rank);
  out.projection.noalias() = out.basis.skeleton().transpose() * row_full;
  return out;
}

Matrix coupling_block(const Matrix& left_projection, IndexRange cols, const Matrix& right_basis) {
  const Matrix slice = left_projection.middleCols(cols.begin, cols.size);
  Matrix s;
  s.noalias() = slice * right_basis;
  return s;
}

}  // namespace detail

namespace {

struct SubtreeResult {
  Matrix projection;  // V^T A(range, :)
  Matrix expanded;    // V, |range| x rank
};

class HssBuilder {
 public:
  HssBuilder(const KernelSpec& spec, const PointSet& ps, HssMatrix& h)
      : spec_(spec), ps_(ps), h_(h) {}

  SubtreeResult build(int level, Index node) {
    const IndexRange rows = h_.range(level, node);
    if (level == h_.max_level) {
      auto leaf = detail::compress_leaf(spec_, ps_, rows, h_.options.max_rank,
                                        h_.options.diagonal_shift);
      h_.leaf_diag[static_cast<std::size_t>(node)] = std::move(leaf.diag);
      SubtreeResult out;
      out.expanded = leaf.basis.skeleton();
      out.projection = std::move(leaf.projection);
      h_.bases[static_cast<std::size_t>(level)][static_cast<std::size_t>(node)] = std::move(leaf.basis);
      return out;
    }
    SubtreeResult left = build(level + 1, 2 * node);
    SubtreeResult right = build(level + 1, 2 * node + 1);
    h_.couplings[static_cast<std::size_t>(level + 1)][static_cast<std::size_t>(node)] =
        detail::coupling_block(left.projection, h_.range(level + 1, 2 * node + 1), right.expanded);
    if (level == 0) return {};

    const Index k0 = left.projection.rows();
    const Index k1 = right.projection.rows();
    Matrix stacked(k0 + k1, h_.n);
    stacked.topRows(k0) = left.projection;
    stacked.bottomRows(k1) = right.projection;
    left.projection.resize(0, 0);
    right.projection.resize(0, 0);

    BasisU basis = build_shared_basis(detail::drop_columns(stacked, rows), h_.options.upper_cap());
    SubtreeResult out;
    out.projection.noalias() = basis.skeleton().transpose() * stacked;
    const auto us = basis.skeleton();
    out.expanded.resize(rows.size, basis.skeleton_dim);
    out.expanded.topRows(left.expanded.rows()).noalias() = left.expanded * us.topRows(k0);
    out.expanded.bottomRows(right.expanded.rows()).noalias() = right.expanded * us.bottomRows(k1);
    h_.bases[static_cast<std::size_t>(level)][static_cast<std::size_t>(node)] = std::move(basis);
    return out;
  }

 private:
  const KernelSpec& spec_;
  const PointSet& ps_;
  HssMatrix& h_;
};

}  // namespace

HssMatrix build_hss(const KernelSpec& spec, const PointSet& ps, Index nleaf,
                    const BuildOptions& options) {
  spec.validate();
  const PointSet tree = ps.with_leaf_size(nleaf);
  if (tree.max_level() < 1) {
    std::ostringstream msg;
    msg << "build_hss: N = " << ps.size() << " must be nleaf * 2^L with L >= 1 (nleaf = "
        << nleaf << "); valid sizes include " << 2 * nleaf << ", " << 4 * nleaf << ", "
        << 8 * nleaf;
    throw std::invalid_argument(msg.str());
  }
  if (options.max_rank < 1 || options.max_rank > nleaf) {
    throw std::invalid_argument("build_hss: max_rank must lie in [1, nleaf]");
  }
  HssMatrix h;
  h.n = ps.size();
  h.nleaf = nleaf;
  h.max_level = tree.max_level();
  h.kernel = spec;
  h.options = options;
  h.leaf_diag.resize(static_cast<std::size_t>(h.node_count(h.max_level)));
  h.bases.resize(static_cast<std::size_t>(h.max_level) + 1);
  h.couplings.resize(static_cast<std::size_t>(h.max_level) + 1);
  for (int l = 1; l <= h.max_level; ++l) {
    h.bases[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(h.node_count(l)));
    h.couplings[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(h.node_count(l - 1)));
  }
  HssBuilder(spec, ps, h).build(0, 0);
  return h;
}

HssMatrix build_hss(const KernelSpec& spec, const PointSet& ps, Index nleaf, Index max_rank) {
  BuildOptions options;
  options.max_rank = max_rank;
  return build_hss(spec, ps, nleaf, options);
}

namespace {

using LevelVectors = std::vector<std::vector<Vector>>;

Vector apply_operator(const HssMatrix& h, const Vector& x, bool transposed) {
  if (x.size() != h.n) {
    throw std::invalid_argument("matvec: vector length " + std::to_string(x.size()) +
                                " does not match N = " + std::to_string(h.n));
  }
  const int top = h.max_level;
  LevelVectors xs(static_cast<std::size_t>(top) + 1);
  LevelVectors ys(static_cast<std::size_t>(top) + 1);
  for (int l = 1; l <= top; ++l) {
    xs[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(h.node_count(l)));
    ys[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(h.node_count(l)));
  }

  for (Index i = 0; i < h.node_count(top); ++i) {
    const IndexRange r = h.range(top, i);
    xs[top][i].noalias() = h.basis(top, i).skeleton().transpose() * x.segment(r.begin, r.size);
  }
  for (int l = top - 1; l >= 1; --l) {
    for (Index i = 0; i < h.node_count(l); ++i) {
      const Vector& a = xs[l + 1][2 * i];
      const Vector& b = xs[l + 1][2 * i + 1];
      Vector stacked(a.size() + b.size());
      stacked << a, b;
      xs[l][i].noalias() = h.basis(l, i).skeleton().transpose() * stacked;
    }
  }

  for (int l = 1; l <= top; ++l) {
    for (Index p = 0; p < h.node_count(l - 1); ++p) {
      const Matrix& s = h.coupling(l, p);
      Vector& y0 = ys[l][2 * p];
      Vector& y1 = ys[l][2 * p + 1];
      if (!transposed) {
        y0.noalias() = s * xs[l][2 * p + 1];
        y1.noalias() = s.transpose() * xs[l][2 * p];
      } else {
        const Matrix st = s.transpose();
        y0.noalias() = st.transpose() * xs[l][2 * p + 1];
        y1.noalias() = st * xs[l][2 * p];
      }
    }
  }

  for (int l = 1; l < top; ++l) {
    for (Index i = 0; i < h.node_count(l); ++i) {
      const Vector t = h.basis(l, i).skeleton() * ys[l][i];
      Vector& a = ys[l + 1][2 * i];
      Vector& b = ys[l + 1][2 * i + 1];
      a += t.head(a.size());
      b += t.tail(b.size());
    }
  }

  Vector y(h.n);
  for (Index i = 0; i < h.node_count(top); ++i) {
    const IndexRange r = h.range(top, i);
    const Matrix& d = h.leaf_diag[static_cast<std::size_t>(i)];
    auto seg = y.segment(r.begin, r.size);
    if (!transposed) {
      seg.noalias() = d * x.segment(r.begin, r.size);
    } else {
      seg.noalias() = d.transpose() * x.segment(r.begin, r.size);
    }
    seg.noalias() += h.basis(top, i).skeleton() * ys[top][i];
  }
  return y;
}

}  // namespace

Vector matvec(const HssMatrix& h, const Vector& x) { return apply_operator(h, x, false); }

Vector matvec_transposed(const HssMatrix& h, const Vector& x) {
  return apply_operator(h, x, true);
}

Matrix expanded_basis(const HssMatrix& h, int level, Index node) {
  if (level == h.max_level) return h.basis(level, node).skeleton();
  const Matrix left = expanded_basis(h, level + 1, 2 * node);
  const Matrix right = expanded_basis(h, level + 1, 2 * node + 1);
  const auto us = h.basis(level, node).skeleton();
  Matrix out(left.rows() + right.rows(), us.cols());
  out.topRows(left.rows()).noalias() = left * us.topRows(left.cols());
  out.bottomRows(right.rows()).noalias() = right * us.bottomRows(right.cols());
  return out;
}

Matrix to_dense(const HssMatrix& h) {
  Matrix a = Matrix::Zero(h.n, h.n);
  for (Index i = 0; i < h.node_count(h.max_level); ++i) {
    const IndexRange r = h.range(h.max_level, i);
    a.block(r.begin, r.begin, r.size, r.size) = h.leaf_diag[static_cast<std::size_t>(i)];
  }
  for (int l = 1; l <= h.max_level; ++l) {
    for (Index p = 0; p < h.node_count(l - 1); ++p) {
      const IndexRange r0 = h.range(l, 2 * p);
      const IndexRange r1 = h.range(l, 2 * p + 1);
      const Matrix v0 = expanded_basis(h, l, 2 * p);
      const Matrix v1 = expanded_basis(h, l, 2 * p + 1);
      const Matrix block = v0 * h.coupling(l, p) * v1.transpose();
      a.block(r0.begin, r1.begin, r0.size, r1.size) = block;
      a.block(r1.begin, r0.begin, r1.size, r0.size) = block.transpose();
    }
  }
  return a;
}

Vector dense_matvec(const KernelSpec& spec, const PointSet& ps, const Vector& x,
                    double diagonal_shift) {
  const Index n = ps.size();
  if (x.size() != n) throw std::invalid_argument("dense_matvec: dimension mismatch");
  const Index chunk = std::max<Index>(1, (Index{1} << 22) / std::max<Index>(n, 1));
  Vector y(n);
  for (Index begin = 0; begin < n; begin += chunk) {
    const Index rows = std::min(chunk, n - begin);
    const Matrix block = dense_block(spec, ps, {begin, rows}, {0, n});
    y.segment(begin, rows).noalias() = block * x;
  }
  if (diagonal_shift != 0.0) y += diagonal_shift * x;
  return y;
}

Vector standard_normal(Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector b(n);
  for (Index i = 0; i < n; ++i) b(i) = dist(gen);
  return b;
}

double construct_error(const HssMatrix& h, const KernelSpec& spec, const PointSet& ps,
                       std::uint64_t seed) {
  if (ps.size() != h.n) throw std::invalid_argument("construct_error: geometry size mismatch");
  if (h.n > 65536) throw std::invalid_argument("construct_error: N > 65536 is beyond desk scale");
  const Vector b = standard_normal(h.n, seed);
  const Vector exact = dense_matvec(spec, ps, b, h.options.diagonal_shift);
  const Vector approx = matvec(h, b);
  return (exact - approx).norm() / exact.norm();
}

}  // namespace hssulv
