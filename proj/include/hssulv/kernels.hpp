#pragma once

#include <string>
#include <string_view>

#include "hssulv/geometry.hpp"
#include "hssulv/linalg.hpp"

namespace hssulv {

enum class KernelKind { Laplace2D, Yukawa, Matern };

std::string_view kernel_name(KernelKind kind);
/// Accepts "laplace2d", "yukawa", "matern". Throws std::invalid_argument otherwise.
KernelKind parse_kernel_kind(std::string_view name);

/// Green's function selector plus its constants.
///
///   Laplace2D: f = -ln(epsilon + d)
///   Yukawa:    f = exp(-alpha (theta + d)) / (theta + d)
///   Matern:    f = sigma^2 / (2^(rho-1) Gamma(rho)) (d/mu)^sigma K_sigma(d/mu),  f(0) = sigma^2
///
/// The Matern form keeps sigma as both the Bessel order and the exponent. The usual
/// parameterization would use the smoothness rho there; with the defaults this gives a
/// smoothness-1 Matern scaled by sqrt(2/pi) plus a nugget on the diagonal.
struct KernelSpec {
  KernelKind kind = KernelKind::Laplace2D;
  double epsilon = 1e-9;
  double alpha = 1.0;
  double theta = 1e-9;
  double sigma = 1.0;
  double mu = 0.03;
  double rho = 0.5;

  static KernelSpec laplace2d(double epsilon = 1e-9);
  static KernelSpec yukawa(double alpha = 1.0, double theta = 1e-9);
  static KernelSpec matern(double sigma = 1.0, double mu = 0.03, double rho = 0.5);

  /// Throws std::invalid_argument unless every constant used by `kind` is positive and finite.
  void validate() const;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Kernel value for the Euclidean distance between x and y. Exactly symmetric in (x, y).
double kernel_eval(const KernelSpec& spec, const Point& x, const Point& y);

/// Kernel value as a function of distance. Throws std::domain_error naming the
/// distance when the result is not finite.
double kernel_at_distance(const KernelSpec& spec, double dist);

/// Entry (a, b) = kernel_eval(points[rows.begin + a], points[cols.begin + b]).
Matrix dense_block(const KernelSpec& spec, const PointSet& ps, IndexRange rows, IndexRange cols);

}  // namespace hssulv
