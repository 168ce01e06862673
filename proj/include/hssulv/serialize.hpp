#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "hssulv/hss.hpp"

namespace hssulv {

/// Binary HSS container, native little-endian:
///
///   char[8]  magic "HSSULV\0\0"
///   u32      format version (kHssFormatVersion), u32 reserved = 0
///   i64      N, nleaf, max_level
///   u32      kernel kind, u32 reserved; f64 epsilon, alpha, theta, sigma, mu, rho
///   i64      max_rank, upper_max_rank; f64 diagonal_shift
///   ranks    for l = 1..max_level, i = 0..2^l-1: i64 redundant_dim, skeleton_dim
///   blocks   leaf diagonal blocks; then for l = max_level..1 the bases of level l
///            followed by its sibling couplings
///
/// Each matrix is stored as i64 rows, i64 cols, then rows*cols f64 in column-major order.
inline constexpr std::uint32_t kHssFormatVersion = 1;

void write_hss(std::ostream& out, const HssMatrix& h);
HssMatrix read_hss(std::istream& in);

void save_hss(const std::string& path, const HssMatrix& h);
HssMatrix load_hss(const std::string& path);

}  // namespace hssulv
