#pragma once

#include <Eigen/Dense>

#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hssulv/geometry.hpp"

namespace hssulv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised by Cholesky-type factorizations when a pivot is not strictly positive.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(Index pivot_index, double pivot_value, const std::string& context = {});

  Index pivot_index() const { return pivot_index_; }
  double pivot_value() const { return pivot_value_; }

 private:
  Index pivot_index_;
  double pivot_value_;
};

/// Square lower-triangular factor with a strictly positive diagonal.
class LowerTriangular {
 public:
  LowerTriangular() = default;

  /// Validates shape, zero upper triangle and positive diagonal.
  explicit LowerTriangular(Matrix l);

  Index dim() const { return l_.rows(); }
  const Matrix& matrix() const { return l_; }
  auto view() const { return l_.triangularView<Eigen::Lower>(); }
  /// L^T as an upper-triangular view.
  auto transposed_view() const { return l_.transpose().triangularView<Eigen::Upper>(); }

  friend bool operator==(const LowerTriangular& a, const LowerTriangular& b) {
    return a.l_.rows() == b.l_.rows() && a.l_.cols() == b.l_.cols() && a.l_ == b.l_;
  }

 private:
  Matrix l_;
};

/// ||A - A^T||_F / ||A||_F (0 for the empty or zero matrix).
double symmetry_defect(const Matrix& a);

/// Blocked right-looking Cholesky A = L L^T.
/// Throws std::invalid_argument for non-square or asymmetric (1e-12 relative) input
/// and NotPositiveDefinite on the first non-positive pivot.
LowerTriangular cholesky(const Matrix& a);

enum class Side { Left, Right };

/// Solves op(L) X = B (Side::Left) or X op(L) = B (Side::Right),
/// where op(L) = L^T when `transposed` is set.
Matrix tri_solve_lower(const LowerTriangular& l, const Matrix& b, Side side, bool transposed);

/// Householder QR with column pivoting, stopped after `max_rank` steps or when the
/// largest remaining column norm drops to rounding level.
class PivotedQr {
 public:
  PivotedQr(Matrix a, Index max_rank);

  Index rank() const { return rank_; }
  Index rows() const { return reflectors_.rows(); }
  /// pivots()[k] is the column of A chosen at step k (k < rank()).
  const std::vector<Index>& pivots() const { return pivots_; }

  /// First rank() columns of the orthogonal factor.
  Matrix thin_q() const;
  /// The full rows() x rows() orthogonal factor H_1 ... H_rank.
  Matrix full_q() const;

 private:
  Matrix apply_to(Matrix m) const;

  Matrix reflectors_;  // Householder vectors below the diagonal of the first rank() columns
  Vector taus_;
  std::vector<Index> pivots_;
  Index rank_ = 0;
};

struct TruncatedQr {
  Matrix q;
  Index achieved_rank = 0;
};

/// Orthonormal basis of the leading column-pivoted QR subspace of `a`, at most
/// `max_rank` columns. Ties between column norms within 1e-14 relative go to the
/// lower column index.
TruncatedQr pivoted_qr_truncated(const Matrix& a, Index max_rank);

/// Relative rank threshold below which pivoted QR stops (remaining norm vs. largest
/// initial column norm).
inline constexpr double kQrRankTolerance = 64.0 * std::numeric_limits<double>::epsilon();

struct PartialFactorResult {
  LowerTriangular l_rr;
  Matrix l_sr;
  Matrix ss_remainder;
};

/// Eliminates the leading redundant_dim x redundant_dim block of a symmetric matrix:
/// l_rr l_rr^T = A^RR, l_sr = A^SR l_rr^{-T}, ss_remainder = A^SS - l_sr l_sr^T.
PartialFactorResult partial_cholesky(const Matrix& a_hat, Index redundant_dim);

enum class PermuteSide { Rows, Cols, Both };

/// Gather permutation: result row i is row perm[i] of A (likewise for columns).
Matrix apply_permutation(const Matrix& a, std::span<const Index> perm, PermuteSide side);

std::vector<Index> inverse_permutation(std::span<const Index> perm);

}  // namespace hssulv
