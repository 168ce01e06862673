#include "hssulv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hssulv {

namespace {

std::string pivot_message(Index index, double value, const std::string& context) {
  std::ostringstream msg;
  msg << "matrix is not positive definite: pivot " << index << " = " << value;
  if (!context.empty()) msg << " (" << context << ")";
  return msg.str();
}

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    std::ostringstream msg;
    msg << what << ": expected a square matrix, got " << a.rows() << "x" << a.cols();
    throw std::invalid_argument(msg.str());
  }
}

constexpr Index kCholeskyBlock = 64;

}  // namespace

NotPositiveDefinite::NotPositiveDefinite(Index pivot_index, double pivot_value,
                                         const std::string& context)
    : std::runtime_error(pivot_message(pivot_index, pivot_value, context)),
      pivot_index_(pivot_index),
      pivot_value_(pivot_value) {}

LowerTriangular::LowerTriangular(Matrix l) : l_(std::move(l)) {
  require_square(l_, "LowerTriangular");
  for (Index j = 0; j < l_.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      if (l_(i, j) != 0.0) throw std::invalid_argument("LowerTriangular: nonzero above diagonal");
    }
    if (!(l_(j, j) > 0.0)) {
      std::ostringstream msg;
      msg << "LowerTriangular: diagonal entry " << j << " = " << l_(j, j) << " is not positive";
      throw std::invalid_argument(msg.str());
    }
  }
}

double symmetry_defect(const Matrix& a) {
  const double norm = a.norm();
  if (norm == 0.0) return 0.0;
  return (a - a.transpose()).norm() / norm;
}

LowerTriangular cholesky(const Matrix& a) {
  require_square(a, "cholesky");
  if (symmetry_defect(a) > 1e-12) {
    throw std::invalid_argument("cholesky: input is not symmetric to 1e-12 relative");
  }
  const Index n = a.rows();
  Matrix l = a;
  for (Index k = 0; k < n; k += kCholeskyBlock) {
    const Index b = std::min(kCholeskyBlock, n - k);
    for (Index j = k; j < k + b; ++j) {
      double d = l(j, j);
      for (Index p = k; p < j; ++p) d -= l(j, p) * l(j, p);
      if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(j, d);
      const double ljj = std::sqrt(d);
      l(j, j) = ljj;
      for (Index i = j + 1; i < k + b; ++i) {
        double s = l(i, j);
        for (Index p = k; p < j; ++p) s -= l(i, p) * l(j, p);
        l(i, j) = s / ljj;
      }
    }
    const Index m = n - k - b;
    if (m > 0) {
      auto panel = l.block(k + b, k, m, b);
      l.block(k, k, b, b).triangularView<Eigen::Lower>().transpose().solveInPlace<Eigen::OnTheRight>(
          panel);
      l.block(k + b, k + b, m, m).selfadjointView<Eigen::Lower>().rankUpdate(panel, -1.0);
    }
  }
  l.triangularView<Eigen::StrictlyUpper>().setZero();
  return LowerTriangular(std::move(l));
}

Matrix tri_solve_lower(const LowerTriangular& l, const Matrix& b, Side side, bool transposed) {
  const Index n = l.dim();
  const bool conformal = side == Side::Left ? b.rows() == n : b.cols() == n;
  if (!conformal) {
    std::ostringstream msg;
    msg << "tri_solve_lower: factor is " << n << "x" << n << " but right-hand side is "
        << b.rows() << "x" << b.cols();
    throw std::invalid_argument(msg.str());
  }
  Matrix x = b;
  if (n == 0 || x.size() == 0) return x;
  const auto tri = l.view();
  if (side == Side::Left) {
    if (transposed) {
      tri.transpose().solveInPlace(x);
    } else {
      tri.solveInPlace(x);
    }
  } else {
    if (transposed) {
      tri.transpose().solveInPlace<Eigen::OnTheRight>(x);
    } else {
      tri.solveInPlace<Eigen::OnTheRight>(x);
    }
  }
  return x;
}

PivotedQr::PivotedQr(Matrix a, Index max_rank) {
  if (max_rank < 1) throw std::invalid_argument("pivoted QR: max_rank must be at least 1");
  const Index m = a.rows();
  const Index n = a.cols();
  const Index kmax = std::min({max_rank, m, n});

  std::vector<double> vn1(static_cast<std::size_t>(n));
  std::vector<double> vn2(static_cast<std::size_t>(n));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  double reference = 0.0;
  for (Index j = 0; j < n; ++j) {
    vn1[j] = vn2[j] = a.col(j).norm();
    reference = std::max(reference, vn1[j]);
  }
  const double recompute_threshold = std::sqrt(std::numeric_limits<double>::epsilon());
  taus_.resize(kmax);

  Index k = 0;
  for (; k < kmax; ++k) {
    Index p = k;
    for (Index j = k + 1; j < n; ++j) {
      if (vn1[j] > vn1[p] * (1.0 + 1e-14)) p = j;
    }
    if (reference == 0.0 || vn1[p] <= kQrRankTolerance * reference) break;
    if (p != k) {
      a.col(k).swap(a.col(p));
      std::swap(vn1[k], vn1[p]);
      std::swap(vn2[k], vn2[p]);
      std::swap(perm[k], perm[p]);
    }

    const Index tail = m - k - 1;
    const double alpha = a(k, k);
    const double tail_norm = tail > 0 ? a.col(k).tail(tail).norm() : 0.0;
    double tau = 0.0;
    if (tail_norm != 0.0) {
      const double beta = -std::copysign(std::hypot(alpha, tail_norm), alpha);
      tau = (beta - alpha) / beta;
      a.col(k).tail(tail) /= (alpha - beta);
      a(k, k) = beta;
    }
    taus_(k) = tau;

    if (tau != 0.0) {
      const auto v = a.col(k).tail(tail);
      for (Index j = k + 1; j < n; ++j) {
        auto col = a.col(j);
        const double w = tau * (col(k) + v.dot(col.tail(tail)));
        col(k) -= w;
        col.tail(tail).noalias() -= w * v;
      }
    }
    for (Index j = k + 1; j < n; ++j) {
      if (vn1[j] == 0.0) continue;
      const double ratio = std::abs(a(k, j)) / vn1[j];
      const double temp = std::max(0.0, (1.0 - ratio) * (1.0 + ratio));
      const double scaled = temp * (vn1[j] / vn2[j]) * (vn1[j] / vn2[j]);
      if (scaled <= recompute_threshold) {
        vn1[j] = tail > 0 ? a.col(j).tail(tail).norm() : 0.0;
        vn2[j] = vn1[j];
      } else {
        vn1[j] *= std::sqrt(temp);
      }
    }
  }
  rank_ = k;
  taus_.conservativeResize(rank_);
  reflectors_ = a.leftCols(rank_);
  pivots_.assign(perm.begin(), perm.begin() + rank_);
}

Matrix PivotedQr::apply_to(Matrix m) const {
  const Index rows = reflectors_.rows();
  for (Index k = rank_ - 1; k >= 0; --k) {
    const double tau = taus_(k);
    if (tau == 0.0) continue;
    const Index tail = rows - k - 1;
    const auto v = reflectors_.col(k).tail(tail);
    Eigen::RowVectorXd w = m.row(k);
    w.noalias() += v.transpose() * m.bottomRows(tail);
    w *= tau;
    m.row(k) -= w;
    m.bottomRows(tail).noalias() -= v * w;
  }
  return m;
}

Matrix PivotedQr::thin_q() const {
  return apply_to(Matrix::Identity(rows(), rank_));
}

Matrix PivotedQr::full_q() const {
  return apply_to(Matrix::Identity(rows(), rows()));
}

TruncatedQr pivoted_qr_truncated(const Matrix& a, Index max_rank) {
  PivotedQr qr(a, max_rank);
  return {qr.thin_q(), qr.rank()};
}

PartialFactorResult partial_cholesky(const Matrix& a_hat, Index redundant_dim) {
  require_square(a_hat, "partial_cholesky");
  const Index n = a_hat.rows();
  if (redundant_dim < 0 || redundant_dim > n) {
    throw std::invalid_argument("partial_cholesky: redundant_dim outside [0, n]");
  }
  if (symmetry_defect(a_hat) > 1e-12) {
    throw std::invalid_argument("partial_cholesky: input is not symmetric to 1e-12 relative");
  }
  const Index r = redundant_dim;
  const Index s = n - r;
  PartialFactorResult out;
  out.ss_remainder = a_hat.bottomRightCorner(s, s);
  if (r == 0) {
    out.l_rr = LowerTriangular(Matrix(0, 0));
    out.l_sr = Matrix(s, 0);
  } else {
    out.l_rr = cholesky(a_hat.topLeftCorner(r, r));
    out.l_sr = tri_solve_lower(out.l_rr, a_hat.bottomLeftCorner(s, r), Side::Right, true);
    if (s > 0) out.ss_remainder.selfadjointView<Eigen::Lower>().rankUpdate(out.l_sr, -1.0);
  }
  out.ss_remainder.triangularView<Eigen::StrictlyUpper>() = out.ss_remainder.transpose();
  return out;
}

namespace {

void require_bijection(std::span<const Index> perm, Index n) {
  if (static_cast<Index>(perm.size()) != n) {
    throw std::invalid_argument("permutation length " + std::to_string(perm.size()) +
                                " does not match dimension " + std::to_string(n));
  }
  std::vector<char> seen(perm.size(), 0);
  for (Index p : perm) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) {
      throw std::invalid_argument("permutation is not a bijection");
    }
    seen[static_cast<std::size_t>(p)] = 1;
  }
}

}  // namespace

Matrix apply_permutation(const Matrix& a, std::span<const Index> perm, PermuteSide side) {
  const bool rows = side != PermuteSide::Cols;
  const bool cols = side != PermuteSide::Rows;
  if (rows) require_bijection(perm, a.rows());
  if (cols) require_bijection(perm, a.cols());
  Matrix out(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    const Index sj = cols ? perm[static_cast<std::size_t>(j)] : j;
    for (Index i = 0; i < a.rows(); ++i) {
      const Index si = rows ? perm[static_cast<std::size_t>(i)] : i;
      out(i, j) = a(si, sj);
    }
  }
  return out;
}

std::vector<Index> inverse_permutation(std::span<const Index> perm) {
  require_bijection(perm, static_cast<Index>(perm.size()));
  std::vector<Index> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);
  return inv;
}

}  // namespace hssulv
