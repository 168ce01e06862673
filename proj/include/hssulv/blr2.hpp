#pragma once

#include <map>
#include <utility>
#include <vector>

#include "hssulv/hss.hpp"

namespace hssulv {

/// Single-level block low-rank matrix with one shared basis per block row.
struct Blr2Matrix {
  Index n = 0;
  Index nleaf = 0;
  Index nblocks = 0;
  KernelSpec kernel;
  BuildOptions options;

  std::vector<Matrix> diag;
  std::vector<BasisU> bases;
  /// S^SS_{i,j} for every i != j; skel[{j,i}] is the exact transpose of skel[{i,j}].
  std::map<std::pair<Index, Index>, Matrix> skel;

  IndexRange range(Index block) const { return {block * nleaf, nleaf}; }
  const Matrix& coupling(Index i, Index j) const { return skel.at({i, j}); }
};

/// Requires N divisible by nleaf and max_rank <= nleaf.
Blr2Matrix build_blr2(const KernelSpec& spec, const PointSet& ps, Index nleaf,
                      const BuildOptions& options);
Blr2Matrix build_blr2(const KernelSpec& spec, const PointSet& ps, Index nleaf, Index max_rank);

Vector matvec(const Blr2Matrix& m, const Vector& x);
Matrix to_dense(const Blr2Matrix& m);

}  // namespace hssulv
