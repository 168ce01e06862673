#pragma once

#include <cstdint>
#include <vector>

#include "hssulv/geometry.hpp"
#include "hssulv/kernels.hpp"
#include "hssulv/linalg.hpp"

namespace hssulv {

/// Square orthonormal basis of one block row, columns ordered [U^R | U^S].
struct BasisU {
  Matrix q;
  Index redundant_dim = 0;
  Index skeleton_dim = 0;

  Index dim() const { return q.rows(); }
  auto redundant() const { return q.leftCols(redundant_dim); }
  auto skeleton() const { return q.rightCols(skeleton_dim); }

  /// Basis of a block with no admissible interactions: identity, all skeleton.
  static BasisU identity(Index n);
};

/// Shared basis of a block row from the concatenation of its admissible blocks.
/// Column-pivoted QR of `row_block` gives U^S; U^R is the orthogonal complement.
/// Throws std::invalid_argument when `row_block` has no columns.
BasisU build_shared_basis(Matrix row_block, Index max_rank);

struct BuildOptions {
  /// Rank cap of the leaf bases.
  Index max_rank = 100;
  /// Rank cap of the transfer bases above the leaves; 0 means "same as max_rank".
  Index upper_max_rank = 0;
  /// Added to the diagonal of the kernel matrix (explicit regularization, default off).
  double diagonal_shift = 0.0;

  Index upper_cap() const { return upper_max_rank > 0 ? upper_max_rank : max_rank; }

  /// Full-rank representation: leaves keep every column, transfer bases keep 2 x child rank.
  static BuildOptions lossless(Index nleaf);

  friend bool operator==(const BuildOptions&, const BuildOptions&) = default;
};

/// Weak-admissibility HSS matrix with nested bases.
///
/// Levels run from 1 (two nodes under the root) to max_level (the leaves). Vectors indexed
/// by level keep a placeholder at index 0.
struct HssMatrix {
  Index n = 0;
  Index nleaf = 0;
  int max_level = 0;
  KernelSpec kernel;
  BuildOptions options;

  std::vector<Matrix> leaf_diag;                 // 2^max_level dense diagonal blocks
  std::vector<std::vector<BasisU>> bases;        // bases[l][i], l in [1, max_level]
  std::vector<std::vector<Matrix>> couplings;    // couplings[l][p] = S^SS_{l; 2p, 2p+1}

  Index node_count(int level) const { return Index{1} << level; }
  const BasisU& basis(int level, Index node) const;
  const Matrix& coupling(int level, Index parent) const;
  Index rank(int level, Index node) const { return basis(level, node).skeleton_dim; }
  IndexRange range(int level, Index node) const;
};

HssMatrix build_hss(const KernelSpec& spec, const PointSet& ps, Index nleaf,
                    const BuildOptions& options);
HssMatrix build_hss(const KernelSpec& spec, const PointSet& ps, Index nleaf, Index max_rank);

/// y = A~ x for the compressed operator.
Vector matvec(const HssMatrix& h, const Vector& x);
/// y = A~^T x, evaluated with every block transposed.
Vector matvec_transposed(const HssMatrix& h, const Vector& x);

/// Dense materialization of the compressed operator.
Matrix to_dense(const HssMatrix& h);

/// Expanded skeleton basis of node (level, i): |range| x rank columns.
Matrix expanded_basis(const HssMatrix& h, int level, Index node);

/// Exact kernel matrix times x (plus shift * x), streaming row blocks so the dense
/// matrix is never held in memory.
Vector dense_matvec(const KernelSpec& spec, const PointSet& ps, const Vector& x,
                    double diagonal_shift = 0.0);

/// Standard-normal probe vector from a 64-bit Mersenne Twister seeded with `seed`.
Vector standard_normal(Index n, std::uint64_t seed);

/// ||A b - A~ b|| / ||A b|| for a standard-normal b. N is limited to 65536.
double construct_error(const HssMatrix& h, const KernelSpec& spec, const PointSet& ps,
                       std::uint64_t seed);

namespace detail {

/// Compression of one leaf block row, shared by the BLR2 and HSS builders so both
/// produce bitwise-identical bases and couplings.
struct LeafCompression {
  Matrix diag;
  BasisU basis;
  Matrix projection;  // U^S^T A(rows, :), rank x N
};

LeafCompression compress_leaf(const KernelSpec& spec, const PointSet& ps, IndexRange rows,
                              Index max_rank, double diagonal_shift);

/// S = projection(:, cols) * right_basis.
Matrix coupling_block(const Matrix& left_projection, IndexRange cols, const Matrix& right_basis);

/// Copy of `m` without the columns in `skip`.
Matrix drop_columns(const Matrix& m, IndexRange skip);

}  // namespace detail

}  // namespace hssulv
