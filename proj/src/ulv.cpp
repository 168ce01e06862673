#include "hssulv/ulv.hpp"

#include <sstream>

namespace hssulv {

namespace {

std::string factorization_message(int level, Index node, const std::string& what) {
  std::ostringstream msg;
  if (level == 0) {
    msg << "root factorization failed: " << what;
  } else {
    msg << "factorization failed at level " << level << ", node " << node << ": " << what;
  }
  return msg.str();
}

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

FactorizationError::FactorizationError(int level, Index node, const std::string& what)
    : std::runtime_error(factorization_message(level, node, what)), level_(level), node_(node) {}

bool operator==(const NodeFactors& a, const NodeFactors& b) {
  return same_matrix(a.basis.q, b.basis.q) && a.basis.redundant_dim == b.basis.redundant_dim &&
         a.l_rr == b.l_rr && same_matrix(a.l_sr, b.l_sr) &&
         same_matrix(a.ss_remainder, b.ss_remainder);
}

bool operator==(const UlvFactors& a, const UlvFactors& b) {
  if (a.n != b.n || a.max_level != b.max_level || a.levels.size() != b.levels.size()) return false;
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    if (a.levels[l].nodes != b.levels[l].nodes) return false;
    if (a.levels[l].merge_perm != b.levels[l].merge_perm) return false;
  }
  return a.root == b.root;
}

Matrix diagonal_product(const Matrix& d, const BasisU& u) {
  if (d.rows() != d.cols() || u.dim() != d.rows() || u.q.cols() != d.cols()) {
    std::ostringstream msg;
    msg << "diagonal_product: block " << d.rows() << "x" << d.cols() << " vs basis " << u.q.rows()
        << "x" << u.q.cols();
    throw std::invalid_argument(msg.str());
  }
  Matrix du;
  du.noalias() = d * u.q;
  Matrix a_hat;
  a_hat.noalias() = u.q.transpose() * du;
  Matrix sym = 0.5 * (a_hat + a_hat.transpose());
  return sym;
}

Matrix merge_children(const Matrix& ss_left, const Matrix& ss_right, const Matrix& coupling) {
  const Index r0 = ss_left.rows();
  const Index r1 = ss_right.rows();
  if (ss_left.cols() != r0 || ss_right.cols() != r1 || coupling.rows() != r0 ||
      coupling.cols() != r1) {
    throw std::invalid_argument("merge_children: inconsistent block dimensions");
  }
  Matrix parent(r0 + r1, r0 + r1);
  parent.topLeftCorner(r0, r0) = ss_left;
  parent.topRightCorner(r0, r1) = coupling;
  parent.bottomLeftCorner(r1, r0) = coupling.transpose();
  parent.bottomRightCorner(r1, r1) = ss_right;
  return parent;
}

NodeFactors factor_node(const Matrix& d, const BasisU& u, int level, Index node) {
  NodeFactors nf;
  nf.basis = u;
  try {
    auto pf = partial_cholesky(diagonal_product(d, u), u.redundant_dim);
    nf.l_rr = std::move(pf.l_rr);
    nf.l_sr = std::move(pf.l_sr);
    nf.ss_remainder = std::move(pf.ss_remainder);
  } catch (const NotPositiveDefinite& e) {
    throw FactorizationError(level, node, e.what());
  }
  return nf;
}

std::vector<Index> merge_permutation(const std::vector<NodeFactors>& nodes) {
  std::vector<Index> redundant;
  std::vector<Index> skeleton;
  Index offset = 0;
  for (const auto& nf : nodes) {
    for (Index k = 0; k < nf.basis.redundant_dim; ++k) redundant.push_back(offset + k);
    for (Index k = 0; k < nf.basis.skeleton_dim; ++k) {
      skeleton.push_back(offset + nf.basis.redundant_dim + k);
    }
    offset += nf.basis.dim();
  }
  redundant.insert(redundant.end(), skeleton.begin(), skeleton.end());
  return redundant;
}

UlvFactors ulv_factor_hss(const HssMatrix& h) {
  UlvFactors f;
  f.n = h.n;
  f.nleaf = h.nleaf;
  f.max_level = h.max_level;
  f.levels.resize(static_cast<std::size_t>(h.max_level) + 1);

  std::vector<Matrix> blocks = h.leaf_diag;
  Matrix root_block;
  for (int l = h.max_level; l >= 1; --l) {
    auto& nodes = f.levels[static_cast<std::size_t>(l)].nodes;
    nodes.reserve(static_cast<std::size_t>(h.node_count(l)));
    for (Index i = 0; i < h.node_count(l); ++i) {
      nodes.push_back(factor_node(blocks[static_cast<std::size_t>(i)], h.basis(l, i), l, i));
    }
    f.levels[static_cast<std::size_t>(l)].merge_perm = merge_permutation(nodes);
    std::vector<Matrix> parents;
    for (Index p = 0; p < h.node_count(l - 1); ++p) {
      parents.push_back(merge_children(nodes[2 * p].ss_remainder, nodes[2 * p + 1].ss_remainder,
                                       h.coupling(l, p)));
    }
    if (l == 1) {
      root_block = std::move(parents.front());
    } else {
      blocks = std::move(parents);
    }
  }
  try {
    f.root = cholesky(root_block);
  } catch (const NotPositiveDefinite& e) {
    throw FactorizationError(0, 0, e.what());
  }
  return f;
}

UlvFactors ulv_factor_blr2(const Blr2Matrix& m) {
  UlvFactors f;
  f.n = m.n;
  f.nleaf = m.nleaf;
  f.max_level = 1;
  f.levels.resize(2);
  auto& nodes = f.levels[1].nodes;
  std::vector<Index> offsets;
  Index total = 0;
  for (Index i = 0; i < m.nblocks; ++i) {
    nodes.push_back(factor_node(m.diag[i], m.bases[i], 1, i));
    offsets.push_back(total);
    total += nodes.back().basis.skeleton_dim;
  }
  f.levels[1].merge_perm = merge_permutation(nodes);

  Matrix root_block(total, total);
  for (Index i = 0; i < m.nblocks; ++i) {
    const Index ki = nodes[i].basis.skeleton_dim;
    root_block.block(offsets[i], offsets[i], ki, ki) = nodes[i].ss_remainder;
    for (Index j = 0; j < m.nblocks; ++j) {
      if (j == i) continue;
      const Index kj = nodes[j].basis.skeleton_dim;
      root_block.block(offsets[i], offsets[j], ki, kj) = m.coupling(i, j);
    }
  }
  try {
    f.root = cholesky(root_block);
  } catch (const NotPositiveDefinite& e) {
    throw FactorizationError(0, 0, e.what());
  }
  return f;
}

Vector ulv_solve(const UlvFactors& f, const Vector& b) {
  if (b.size() != f.n) {
    throw std::invalid_argument("ulv_solve: right-hand side length " + std::to_string(b.size()) +
                                " does not match N = " + std::to_string(f.n));
  }
  const int top = f.max_level;
  // Eliminated redundant parts, kept for the downward sweep.
  std::vector<std::vector<Vector>> z_redundant(static_cast<std::size_t>(top) + 1);

  Vector current = b;
  for (int l = top; l >= 1; --l) {
    const auto& nodes = f.level(l).nodes;
    auto& zr = z_redundant[static_cast<std::size_t>(l)];
    zr.resize(nodes.size());
    Index skeleton_total = 0;
    for (const auto& nf : nodes) skeleton_total += nf.basis.skeleton_dim;
    Vector next(skeleton_total);
    Index in = 0;
    Index out = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const NodeFactors& nf = nodes[i];
      const Index r = nf.basis.redundant_dim;
      const Index s = nf.basis.skeleton_dim;
      const Vector rotated = nf.basis.q.transpose() * current.segment(in, nf.basis.dim());
      Vector z = rotated.head(r);
      if (r > 0) nf.l_rr.view().solveInPlace(z);
      Vector zs = rotated.tail(s);
      if (r > 0) zs.noalias() -= nf.l_sr * z;
      next.segment(out, s) = zs;
      zr[i] = std::move(z);
      in += nf.basis.dim();
      out += s;
    }
    current = std::move(next);
  }

  if (f.root.dim() > 0) {
    f.root.view().solveInPlace(current);
    f.root.transposed_view().solveInPlace(current);
  }

  for (int l = 1; l <= top; ++l) {
    const auto& nodes = f.level(l).nodes;
    const auto& zr = z_redundant[static_cast<std::size_t>(l)];
    Index total = 0;
    for (const auto& nf : nodes) total += nf.basis.dim();
    Vector next(total);
    Index in = 0;
    Index out = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const NodeFactors& nf = nodes[i];
      const Index r = nf.basis.redundant_dim;
      const Index s = nf.basis.skeleton_dim;
      Vector local(r + s);
      const auto ys = current.segment(in, s);
      if (r > 0) {
        Vector yr = zr[i];
        yr.noalias() -= nf.l_sr.transpose() * ys;
        nf.l_rr.transposed_view().solveInPlace(yr);
        local.head(r) = yr;
      }
      local.tail(s) = ys;
      next.segment(out, nf.basis.dim()).noalias() = nf.basis.q * local;
      in += s;
      out += nf.basis.dim();
    }
    current = std::move(next);
  }
  return current;
}

double solve_error(const UlvFactors& f, const HssMatrix& h, std::uint64_t seed) {
  const Vector b = standard_normal(h.n, seed);
  const Vector x = ulv_solve(f, matvec(h, b));
  return (b - x).norm() / b.norm();
}

double solve_error(const UlvFactors& f, const Blr2Matrix& m, std::uint64_t seed) {
  const Vector b = standard_normal(m.n, seed);
  const Vector x = ulv_solve(f, matvec(m, b));
  return (b - x).norm() / b.norm();
}

Matrix reconstruct_factored(const UlvFactors& f) {
  if (f.n > kReconstructMaxN) {
    throw std::invalid_argument("reconstruct_check: N = " + std::to_string(f.n) +
                                " exceeds the dense guard of " + std::to_string(kReconstructMaxN));
  }
  Matrix a = f.root.matrix() * f.root.matrix().transpose();
  for (int l = 1; l <= f.max_level; ++l) {
    const auto& lvl = f.level(l);
    Index dim = 0;
    Index redundant = 0;
    for (const auto& nf : lvl.nodes) {
      dim += nf.basis.dim();
      redundant += nf.basis.redundant_dim;
    }
    Matrix z = Matrix::Zero(dim, dim);
    z.topLeftCorner(redundant, redundant).setIdentity();
    z.bottomRightCorner(dim - redundant, dim - redundant) = a;
    const Matrix middle = apply_permutation(z, inverse_permutation(lvl.merge_perm), PermuteSide::Both);

    // Block-diagonal B = U^F L, applied from both sides block by block.
    std::vector<Matrix> b_blocks;
    for (const auto& nf : lvl.nodes) {
      const Index r = nf.basis.redundant_dim;
      const Index s = nf.basis.skeleton_dim;
      Matrix l_hat = Matrix::Identity(r + s, r + s);
      l_hat.topLeftCorner(r, r) = nf.l_rr.matrix();
      l_hat.bottomLeftCorner(s, r) = nf.l_sr;
      b_blocks.push_back(nf.basis.q * l_hat);
    }
    Matrix left(dim, dim);
    Index off = 0;
    for (const auto& blk : b_blocks) {
      left.middleRows(off, blk.rows()).noalias() = blk * middle.middleRows(off, blk.rows());
      off += blk.rows();
    }
    a.resize(dim, dim);
    off = 0;
    for (const auto& blk : b_blocks) {
      a.middleCols(off, blk.rows()).noalias() = left.middleCols(off, blk.rows()) * blk.transpose();
      off += blk.rows();
    }
  }
  return a;
}

double reconstruct_check(const UlvFactors& f, const HssMatrix& h) {
  if (h.n > kReconstructMaxN) throw std::invalid_argument("reconstruct_check: N > 2048");
  const Matrix dense = to_dense(h);
  return (reconstruct_factored(f) - dense).norm() / dense.norm();
}

double reconstruct_check(const UlvFactors& f, const Blr2Matrix& m) {
  if (m.n > kReconstructMaxN) throw std::invalid_argument("reconstruct_check: N > 2048");
  const Matrix dense = to_dense(m);
  return (reconstruct_factored(f) - dense).norm() / dense.norm();
}

}  // namespace hssulv
