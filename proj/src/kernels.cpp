#include "hssulv/kernels.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hssulv {

std::string_view kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::Laplace2D: return "laplace2d";
    case KernelKind::Yukawa: return "yukawa";
    case KernelKind::Matern: return "matern";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "laplace2d") return KernelKind::Laplace2D;
  if (name == "yukawa") return KernelKind::Yukawa;
  if (name == "matern") return KernelKind::Matern;
  throw std::invalid_argument("unknown kernel '" + std::string(name) +
                              "' (expected laplace2d, yukawa or matern)");
}

KernelSpec KernelSpec::laplace2d(double epsilon) {
  KernelSpec s;
  s.kind = KernelKind::Laplace2D;
  s.epsilon = epsilon;
  return s;
}

KernelSpec KernelSpec::yukawa(double alpha, double theta) {
  KernelSpec s;
  s.kind = KernelKind::Yukawa;
  s.alpha = alpha;
  s.theta = theta;
  return s;
}

KernelSpec KernelSpec::matern(double sigma, double mu, double rho) {
  KernelSpec s;
  s.kind = KernelKind::Matern;
  s.sigma = sigma;
  s.mu = mu;
  s.rho = rho;
  return s;
}

void KernelSpec::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("kernel constant ") + name + " must be positive");
    }
  };
  switch (kind) {
    case KernelKind::Laplace2D: check(epsilon, "epsilon"); break;
    case KernelKind::Yukawa:
      check(alpha, "alpha");
      check(theta, "theta");
      break;
    case KernelKind::Matern:
      check(sigma, "sigma");
      check(mu, "mu");
      check(rho, "rho");
      break;
  }
}

double kernel_at_distance(const KernelSpec& spec, double dist) {
  double value = 0.0;
  switch (spec.kind) {
    case KernelKind::Laplace2D:
      value = -std::log(spec.epsilon + dist);
      break;
    case KernelKind::Yukawa: {
      const double r = spec.theta + dist;
      value = std::exp(-spec.alpha * r) / r;
      break;
    }
    case KernelKind::Matern: {
      if (dist == 0.0) {
        value = spec.sigma * spec.sigma;
        break;
      }
      const double t = dist / spec.mu;
      const double prefactor =
          spec.sigma * spec.sigma / (std::pow(2.0, spec.rho - 1.0) * std::tgamma(spec.rho));
      value = prefactor * std::pow(t, spec.sigma) * std::cyl_bessel_k(spec.sigma, t);
      break;
    }
  }
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << kernel_name(spec.kind) << " kernel is not finite at distance " << dist;
    throw std::domain_error(msg.str());
  }
  return value;
}

double kernel_eval(const KernelSpec& spec, const Point& x, const Point& y) {
  const double dx = x[0] - y[0];
  const double dy = x[1] - y[1];
  return kernel_at_distance(spec, std::sqrt(dx * dx + dy * dy));
}

Matrix dense_block(const KernelSpec& spec, const PointSet& ps, IndexRange rows, IndexRange cols) {
  if (rows.begin < 0 || cols.begin < 0 || rows.end() > ps.size() || cols.end() > ps.size()) {
    throw std::out_of_range("dense_block: range outside [0, N)");
  }
  Matrix out(rows.size, cols.size);
  for (Index b = 0; b < cols.size; ++b) {
    const Point& y = ps[cols.begin + b];
    for (Index a = 0; a < rows.size; ++a) out(a, b) = kernel_eval(spec, ps[rows.begin + a], y);
  }
  return out;
}

}  // namespace hssulv
