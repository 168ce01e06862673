#include "hssulv/blr2.hpp"

#include <stdexcept>

namespace hssulv {

Blr2Matrix build_blr2(const KernelSpec& spec, const PointSet& ps, Index nleaf,
                      const BuildOptions& options) {
  spec.validate();
  if (nleaf <= 0 || ps.size() % nleaf != 0) {
    throw std::invalid_argument("build_blr2: N must be divisible by nleaf");
  }
  if (options.max_rank < 1 || options.max_rank > nleaf) {
    throw std::invalid_argument("build_blr2: max_rank must lie in [1, nleaf]");
  }
  Blr2Matrix m;
  m.n = ps.size();
  m.nleaf = nleaf;
  m.nblocks = m.n / nleaf;
  m.kernel = spec;
  m.options = options;

  if (m.nblocks == 1) {
    Matrix d = dense_block(spec, ps, {0, m.n}, {0, m.n});
    if (options.diagonal_shift != 0.0) d.diagonal().array() += options.diagonal_shift;
    m.diag.push_back(std::move(d));
    m.bases.push_back(BasisU::identity(m.n));
    return m;
  }

  std::vector<Matrix> projections;
  for (Index i = 0; i < m.nblocks; ++i) {
    auto leaf = detail::compress_leaf(spec, ps, m.range(i), options.max_rank, options.diagonal_shift);
    m.diag.push_back(std::move(leaf.diag));
    m.bases.push_back(std::move(leaf.basis));
    projections.push_back(std::move(leaf.projection));
  }
  for (Index i = 0; i < m.nblocks; ++i) {
    for (Index j = i + 1; j < m.nblocks; ++j) {
      Matrix s = detail::coupling_block(projections[static_cast<std::size_t>(i)], m.range(j),
                                        m.bases[static_cast<std::size_t>(j)].skeleton());
      m.skel[{j, i}] = s.transpose();
      m.skel[{i, j}] = std::move(s);
    }
  }
  return m;
}

Blr2Matrix build_blr2(const KernelSpec& spec, const PointSet& ps, Index nleaf, Index max_rank) {
  BuildOptions options;
  options.max_rank = max_rank;
  return build_blr2(spec, ps, nleaf, options);
}

Vector matvec(const Blr2Matrix& m, const Vector& x) {
  if (x.size() != m.n) throw std::invalid_argument("matvec: dimension mismatch");
  std::vector<Vector> xs(static_cast<std::size_t>(m.nblocks));
  for (Index j = 0; j < m.nblocks; ++j) {
    const IndexRange r = m.range(j);
    xs[j].noalias() = m.bases[j].skeleton().transpose() * x.segment(r.begin, r.size);
  }
  Vector y(m.n);
  for (Index i = 0; i < m.nblocks; ++i) {
    const BasisU& u = m.bases[i];
    Vector acc = Vector::Zero(u.skeleton_dim);
    for (Index j = 0; j < m.nblocks; ++j) {
      if (j == i) continue;
      // Lower-triangle couplings go through the stored upper block so that the
      // two-block case evaluates exactly like the HSS operator.
      if (i < j) {
        acc.noalias() += m.coupling(i, j) * xs[j];
      } else {
        acc.noalias() += m.coupling(j, i).transpose() * xs[j];
      }
    }
    const IndexRange r = m.range(i);
    auto seg = y.segment(r.begin, r.size);
    seg.noalias() = m.diag[i] * x.segment(r.begin, r.size);
    if (u.skeleton_dim > 0) seg.noalias() += u.skeleton() * acc;
  }
  return y;
}

Matrix to_dense(const Blr2Matrix& m) {
  Matrix a(m.n, m.n);
  for (Index i = 0; i < m.nblocks; ++i) {
    const IndexRange ri = m.range(i);
    a.block(ri.begin, ri.begin, ri.size, ri.size) = m.diag[i];
    for (Index j = 0; j < m.nblocks; ++j) {
      if (j == i) continue;
      const IndexRange rj = m.range(j);
      a.block(ri.begin, rj.begin, ri.size, rj.size) =
          m.bases[i].skeleton() * m.coupling(i, j) * m.bases[j].skeleton().transpose();
    }
  }
  return a;
}

}  // namespace hssulv
