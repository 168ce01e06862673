#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hssulv/blr2.hpp"
#include "hssulv/hss.hpp"
#include "hssulv/linalg.hpp"

namespace hssulv {

/// Non-positive pivot during ULV factorization, tagged with the failing node.
/// Level 0 denotes the root factorization.
class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(int level, Index node, const std::string& what);
  int level() const { return level_; }
  Index node() const { return node_; }

 private:
  int level_;
  Index node_;
};

struct NodeFactors {
  BasisU basis;
  LowerTriangular l_rr;   // redundant_dim^2
  Matrix l_sr;            // skeleton_dim x redundant_dim
  Matrix ss_remainder;    // skeleton_dim^2, handed to the merge

  friend bool operator==(const NodeFactors& a, const NodeFactors& b);
};

struct UlvLevelFactors {
  std::vector<NodeFactors> nodes;
  /// Merge permutation: entry k is the node-local position of the k-th entry of the
  /// [all redundant; all skeleton] ordering.
  std::vector<Index> merge_perm;
};

/// Factored form A = prod_l (U^F_l L_l P_l^T) (L_0 L_0^T) prod_l (P_l L_l^T U^F_l^T).
///
/// Levels above 1 merge node pairs (2p, 2p + 1) into parent p. The nodes of level 1 all
/// merge into the root, which covers both the HSS case (two nodes) and BLR2 (nblocks nodes).
struct UlvFactors {
  Index n = 0;
  Index nleaf = 0;
  int max_level = 0;
  std::vector<UlvLevelFactors> levels;  // levels[l], l in [1, max_level]
  LowerTriangular root;

  const UlvLevelFactors& level(int l) const { return levels.at(static_cast<std::size_t>(l)); }
  Index node_count(int l) const { return static_cast<Index>(level(l).nodes.size()); }

  friend bool operator==(const UlvFactors& a, const UlvFactors& b);
};

/// U^T D U, symmetrized; the RR/RS/SR/SS split follows U's partition.
Matrix diagonal_product(const Matrix& d, const BasisU& u);

/// Parent dense block [[ss_left, coupling], [coupling^T, ss_right]].
Matrix merge_children(const Matrix& ss_left, const Matrix& ss_right, const Matrix& coupling);

/// Diagonal product followed by partial Cholesky of one node.
NodeFactors factor_node(const Matrix& d, const BasisU& u, int level, Index node);

/// Computes the merge permutation of one level from the node bases.
std::vector<Index> merge_permutation(const std::vector<NodeFactors>& nodes);

UlvFactors ulv_factor_hss(const HssMatrix& h);
UlvFactors ulv_factor_blr2(const Blr2Matrix& m);

/// x with A~ x = b, applying the upward forward sweep, the root solve and the
/// mirrored downward sweep.
Vector ulv_solve(const UlvFactors& f, const Vector& b);

/// ||b - A~^{-1} A~ b|| / ||b|| for a standard-normal b.
double solve_error(const UlvFactors& f, const HssMatrix& h, std::uint64_t seed);
double solve_error(const UlvFactors& f, const Blr2Matrix& m, std::uint64_t seed);

/// Dense product of the stored factor chain (N <= 2048).
Matrix reconstruct_factored(const UlvFactors& f);

/// Relative Frobenius distance between the factor chain and the dense compressed operator.
double reconstruct_check(const UlvFactors& f, const HssMatrix& h);
double reconstruct_check(const UlvFactors& f, const Blr2Matrix& m);

inline constexpr Index kReconstructMaxN = 2048;

}  // namespace hssulv
