#include "hssulv/serialize.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace hssulv {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'S', 'S', 'U', 'L', 'V', '\0', '\0'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("read_hss: truncated container");
  }
  return value;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put<std::int64_t>(out, m.rows());
  put<std::int64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

Matrix get_matrix(std::istream& in) {
  const auto rows = get<std::int64_t>(in);
  const auto cols = get<std::int64_t>(in);
  if (rows < 0 || cols < 0 || rows > (1 << 20) || cols > (1 << 20)) {
    throw std::runtime_error("read_hss: corrupt matrix header");
  }
  Matrix m(rows, cols);
  if (!in.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())))) {
    throw std::runtime_error("read_hss: truncated matrix data");
  }
  return m;
}

}  // namespace

void write_hss(std::ostream& out, const HssMatrix& h) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kHssFormatVersion);
  put<std::uint32_t>(out, 0);
  put<std::int64_t>(out, h.n);
  put<std::int64_t>(out, h.nleaf);
  put<std::int64_t>(out, h.max_level);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(h.kernel.kind));
  put<std::uint32_t>(out, 0);
  for (double c : {h.kernel.epsilon, h.kernel.alpha, h.kernel.theta, h.kernel.sigma, h.kernel.mu,
                   h.kernel.rho}) {
    put<double>(out, c);
  }
  put<std::int64_t>(out, h.options.max_rank);
  put<std::int64_t>(out, h.options.upper_max_rank);
  put<double>(out, h.options.diagonal_shift);
  for (int l = 1; l <= h.max_level; ++l) {
    for (Index i = 0; i < h.node_count(l); ++i) {
      put<std::int64_t>(out, h.basis(l, i).redundant_dim);
      put<std::int64_t>(out, h.basis(l, i).skeleton_dim);
    }
  }
  for (const auto& d : h.leaf_diag) put_matrix(out, d);
  for (int l = h.max_level; l >= 1; --l) {
    for (Index i = 0; i < h.node_count(l); ++i) put_matrix(out, h.basis(l, i).q);
    for (Index p = 0; p < h.node_count(l - 1); ++p) put_matrix(out, h.coupling(l, p));
  }
  if (!out) throw std::runtime_error("write_hss: stream error");
}

HssMatrix read_hss(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("read_hss: not an HSS container");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kHssFormatVersion) {
    throw std::runtime_error("read_hss: unsupported format version " + std::to_string(version));
  }
  get<std::uint32_t>(in);
  HssMatrix h;
  h.n = get<std::int64_t>(in);
  h.nleaf = get<std::int64_t>(in);
  const auto levels = get<std::int64_t>(in);
  if (h.n <= 0 || h.nleaf <= 0 || levels < 1 || levels > 30 || (h.nleaf << levels) != h.n) {
    throw std::runtime_error("read_hss: inconsistent header");
  }
  h.max_level = static_cast<int>(levels);
  const auto kind = get<std::uint32_t>(in);
  if (kind > static_cast<std::uint32_t>(KernelKind::Matern)) {
    throw std::runtime_error("read_hss: unknown kernel kind");
  }
  h.kernel.kind = static_cast<KernelKind>(kind);
  get<std::uint32_t>(in);
  h.kernel.epsilon = get<double>(in);
  h.kernel.alpha = get<double>(in);
  h.kernel.theta = get<double>(in);
  h.kernel.sigma = get<double>(in);
  h.kernel.mu = get<double>(in);
  h.kernel.rho = get<double>(in);
  h.options.max_rank = get<std::int64_t>(in);
  h.options.upper_max_rank = get<std::int64_t>(in);
  h.options.diagonal_shift = get<double>(in);

  h.bases.resize(static_cast<std::size_t>(h.max_level) + 1);
  h.couplings.resize(static_cast<std::size_t>(h.max_level) + 1);
  for (int l = 1; l <= h.max_level; ++l) {
    auto& level = h.bases[static_cast<std::size_t>(l)];
    level.resize(static_cast<std::size_t>(h.node_count(l)));
    for (auto& u : level) {
      u.redundant_dim = get<std::int64_t>(in);
      u.skeleton_dim = get<std::int64_t>(in);
    }
    h.couplings[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(h.node_count(l - 1)));
  }
  h.leaf_diag.resize(static_cast<std::size_t>(h.node_count(h.max_level)));
  for (auto& d : h.leaf_diag) d = get_matrix(in);
  for (int l = h.max_level; l >= 1; --l) {
    for (auto& u : h.bases[static_cast<std::size_t>(l)]) {
      u.q = get_matrix(in);
      if (u.q.rows() != u.q.cols() || u.redundant_dim + u.skeleton_dim != u.q.cols()) {
        throw std::runtime_error("read_hss: basis dimensions disagree with the rank table");
      }
    }
    for (auto& s : h.couplings[static_cast<std::size_t>(l)]) s = get_matrix(in);
  }
  return h;
}

void save_hss(const std::string& path, const HssMatrix& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_hss: cannot open " + path);
  write_hss(out, h);
}

HssMatrix load_hss(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_hss: cannot open " + path);
  return read_hss(in);
}

}  // namespace hssulv
