#pragma once

// Kernels, bandwidth schedules and weight schemes shared by every recursive
// estimator in the library.
//
// The compact-support families (epanechnikov, triangular) satisfy the usual
// theory assumptions (symmetric Lipschitz density on [-1, 1]). The gaussian
// family has unbounded support; it is offered because it is the common
// practical choice, but convergence guarantees are only stated for compact
// kernels.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hazardstream/errors.hpp"

namespace hazardstream {

enum class KernelFamily : std::uint8_t { gaussian = 0, epanechnikov = 1, triangular = 2 };

inline std::string_view to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::epanechnikov: return "epanechnikov";
    case KernelFamily::triangular: return "triangular";
  }
  return "unknown";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  if (name == "triangular") return KernelFamily::triangular;
  throw config_error("unknown kernel family '" + std::string(name) + "'");
}

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;

  /// Radius outside which the density is exactly zero (infinity for gaussian).
  [[nodiscard]] double support_radius() const {
    return family == KernelFamily::gaussian ? std::numeric_limits<double>::infinity() : 1.0;
  }

  /// Second moment mu_2(K) = int u^2 K(u) du.
  [[nodiscard]] double second_moment() const {
    switch (family) {
      case KernelFamily::gaussian: return 1.0;
      case KernelFamily::epanechnikov: return 0.2;
      case KernelFamily::triangular: return 1.0 / 6.0;
    }
    return 0.0;
  }

  /// Roughness int K(u)^2 du of the univariate kernel.
  [[nodiscard]] double roughness() const {
    switch (family) {
      case KernelFamily::gaussian: return 0.5 / std::sqrt(std::numbers::pi);
      case KernelFamily::epanechnikov: return 0.6;
      case KernelFamily::triangular: return 2.0 / 3.0;
    }
    return 0.0;
  }

  /// Roughness of the p-dimensional product kernel, c_K = (int K^2)^p.
  [[nodiscard]] double product_roughness(int p) const { return std::pow(roughness(), p); }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline double kernel_eval(const KernelSpec& spec, double u) {
  switch (spec.family) {
    case KernelFamily::gaussian:
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    case KernelFamily::epanechnikov: {
      const double a = std::abs(u);
      return a < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    }
    case KernelFamily::triangular: {
      const double a = std::abs(u);
      return a < 1.0 ? 1.0 - a : 0.0;
    }
  }
  return 0.0;
}

/// h^{-d} * prod_j K(u_j / h).
inline double product_kernel_eval(const KernelSpec& spec, std::span<const double> u, double h) {
  if (u.empty()) throw config_error("product kernel: empty smoothing vector");
  if (!(h > 0.0)) throw config_error("product kernel: bandwidth must be positive");
  double prod = 1.0;
  for (double uj : u) {
    prod *= kernel_eval(spec, uj / h) / h;
    if (prod == 0.0) break;
  }
  return prod;
}

/// h(i) = c * i^{-alpha}, used with smoothing dimension p.
struct BandwidthSchedule {
  double c = 1.0;
  double alpha = 0.2;
  int p = 1;

  BandwidthSchedule() = default;
  BandwidthSchedule(double c_, double alpha_, int p_) : c(c_), alpha(alpha_), p(p_) { validate(); }

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw config_error("bandwidth: c must be positive and finite");
    if (p < 1) throw config_error("bandwidth: smoothing dimension p must be >= 1");
    if (!(alpha > 0.0) || !(alpha < 1.0 / p))
      throw config_error("bandwidth: alpha must lie in (0, 1/p)");
  }

  [[nodiscard]] double at(std::uint64_t i) const {
    if (i == 0) throw config_error("bandwidth: index must be >= 1");
    return c * std::pow(static_cast<double>(i), -alpha);
  }

  friend bool operator==(const BandwidthSchedule&, const BandwidthSchedule&) = default;
};

inline double bandwidth_at(const BandwidthSchedule& s, std::uint64_t i) { return s.at(i); }

/// omega(n, i) = i^beta / sum_{j<=n} j^beta.
///
/// Negative beta reproduces the alternative weightings found in the
/// literature but falls outside the range where rates are proven;
/// `theory_valid(alpha, p)` reports whether 0 <= beta <= alpha * p.
struct WeightScheme {
  double beta = 0.0;

  WeightScheme() = default;
  explicit WeightScheme(double b) : beta(b) {
    if (!std::isfinite(beta)) throw config_error("weights: beta must be finite");
  }

  [[nodiscard]] bool theory_valid(double alpha, int p) const {
    return beta >= 0.0 && beta <= alpha * p;
  }

  /// Unnormalised weight i^beta.
  [[nodiscard]] double raw(std::uint64_t i) const {
    return beta == 0.0 ? 1.0 : std::pow(static_cast<double>(i), beta);
  }

  friend bool operator==(const WeightScheme&, const WeightScheme&) = default;
};

inline std::vector<double> weight_profile(const WeightScheme& scheme, std::uint64_t n) {
  if (n == 0) throw config_error("weight_profile: n must be >= 1");
  std::vector<double> w(n);
  double mass = 0.0;
  for (std::uint64_t i = 1; i <= n; ++i) {
    w[i - 1] = scheme.raw(i);
    mass += w[i - 1];
  }
  for (double& v : w) v /= mass;
  return w;
}

enum class RiemannMode { negative_exponent, positive_exponent };

struct RiemannBounds {
  double lower;
  double upper;
};

/// Closed-form brackets for sum_{i=1}^n i^{-varrho} (negative_exponent) or
/// sum_{i=1}^n i^{rho} (positive_exponent), n > 1, obtained by comparing the
/// sums with the integral of x^{-varrho} (resp. x^rho) over [1, n+1].
inline RiemannBounds riemann_sum_bounds(double exponent, std::uint64_t n, RiemannMode mode) {
  if (n < 2) throw config_error("riemann_sum_bounds: n must be > 1");
  const double nn = static_cast<double>(n);
  if (mode == RiemannMode::negative_exponent) {
    const double v = exponent;
    if (!(v > 0.0)) throw config_error("riemann_sum_bounds: varrho must be > 0");
    if (v == 1.0) throw config_error("riemann_sum_bounds: varrho = 1 is excluded");
    const double lower = (std::pow(nn + 1.0, 1.0 - v) - 1.0) / (1.0 - v);
    const double upper = (std::pow(nn, 1.0 - v) - v) / (1.0 - v);
    return {lower, upper};
  }
  const double r = exponent;
  if (!(r >= 0.0)) throw config_error("riemann_sum_bounds: rho must be >= 0");
  const double lower = (std::pow(nn, 1.0 + r) + r) / (1.0 + r);
  const double upper = (std::pow(nn + 1.0, 1.0 + r) - 1.0) / (1.0 + r);
  return {lower, upper};
}

}  // namespace hazardstream
