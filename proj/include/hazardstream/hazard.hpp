#pragma once

// Assembly of hazard, cumulative hazard, survival, cure probability and
// cumulative incidence estimates from accumulator states, one assembly per
// incompleteness mechanism.
//
// Every denominator receives the ridge 1/n. Denominators obtained by
// subtraction (cure models) are additionally floored at 1/n and the number
// of floored lattice points is reported in the diagnostics. Left limits
// t- are evaluated at t: all estimated functions are continuous in t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hazardstream/accumulator.hpp"
#include "hazardstream/data.hpp"
#include "hazardstream/errors.hpp"

namespace hazardstream {

struct AssemblyDiagnostics {
  std::uint64_t floored_points = 0;  // post-subtraction denominators raised to the ridge
};

struct HazardSurface {
  EvaluationLattice lattice;
  std::vector<double> values;  // x-major, see EvaluationLattice::index
  std::string mechanism;
  std::uint64_t n = 0;
  AssemblyDiagnostics diagnostics;

  [[nodiscard]] double at(std::size_t t_idx, std::size_t x_idx) const { return values[lattice.index(t_idx, x_idx)]; }
  [[nodiscard]] std::span<const double> curve(std::size_t x_idx) const {
    return std::span<const double>(values).subspan(x_idx * lattice.nt(), lattice.nt());
  }
};

/// Per covariate point: cumulative hazard and survival on the t grid.
struct SurvivalCurve {
  EvaluationLattice lattice;
  std::vector<double> cumulative_hazard;  // x-major
  std::vector<double> survival;           // exp(-cumulative_hazard)
  std::string quadrature = "trapezoid";

  [[nodiscard]] double at(std::size_t t_idx, std::size_t x_idx) const {
    return survival[lattice.index(t_idx, x_idx)];
  }
  [[nodiscard]] std::span<const double> curve(std::size_t x_idx) const {
    return std::span<const double>(survival).subspan(x_idx * lattice.nt(), lattice.nt());
  }
};

inline double ridge_for(std::uint64_t n) { return n == 0 ? 0.0 : 1.0 / static_cast<double>(n); }

/// num / den with 0/0 = 0 and negative results clipped to 0.
inline double safe_ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  if (!(den > 0.0)) return 0.0;
  return std::max(0.0, num / den);
}

namespace detail {

inline void require_compatible(const AccumulatorState& a, const AccumulatorState& b, const char* what) {
  if (!(a.lattice() == b.lattice())) throw config_error(std::string(what) + ": lattice mismatch");
  if (a.count() != b.count()) throw config_error(std::string(what) + ": states were built from different n");
}

inline void require_lattice(const EvaluationLattice& a, const EvaluationLattice& b, const char* what) {
  if (!(a == b)) throw config_error(std::string(what) + ": lattice mismatch");
}

inline HazardSurface ratio_surface(const AccumulatorState& num, const AccumulatorState& den, const char* mechanism) {
  detail::require_compatible(num, den, mechanism);
  HazardSurface out{num.lattice(), std::vector<double>(num.values().size()), mechanism, num.count(), {}};
  const double ridge = ridge_for(num.count());
  const auto f = num.values();
  const auto r = den.values();
  for (std::size_t k = 0; k < f.size(); ++k) out.values[k] = safe_ratio(f[k], r[k] + ridge);
  return out;
}

/// Value of a per-t curve at an arbitrary t in (0, t_max], using the same
/// piecewise rule as the cumulative hazard: rectangle below t_min, linear
/// interpolation between grid points.
inline double interpolate_cumulative(std::span<const double> grid, std::span<const double> cum,
                                     std::span<const double> hazard, double t) {
  if (t <= grid.front()) return hazard.front() * t;
  auto it = std::lower_bound(grid.begin(), grid.end(), t);
  const auto k = static_cast<std::size_t>(it - grid.begin());
  if (grid[k] == t) return cum[k];
  const double w = (t - grid[k - 1]) / (grid[k] - grid[k - 1]);
  return (1.0 - w) * cum[k - 1] + w * cum[k];
}

}  // namespace detail

/// Right censoring: lambda = f / (R + 1/n).
inline HazardSurface assemble_hazard_rc(const AccumulatorState& f_state, const AccumulatorState& r_state) {
  return detail::ratio_surface(f_state, r_state, "right_censoring");
}

/// Left censoring reverse-time hazard r = f / (H f_X + 1/n), where the
/// denominator state uses the cdf selector.
inline HazardSurface assemble_reverse_hazard_lc(const AccumulatorState& f_state, const AccumulatorState& h_state) {
  return detail::ratio_surface(f_state, h_state, "left_censoring");
}

/// LTRC: lambda = f / (W + 1/n) with W built from the risk_window selector.
inline HazardSurface assemble_hazard_ltrc(const AccumulatorState& f_state, const AccumulatorState& w_state) {
  return detail::ratio_surface(f_state, w_state, "ltrc");
}

/// Cumulative hazard by composite trapezoid on the t grid; the segment
/// [0, t_min] uses a rectangle with the first hazard value.
inline std::vector<double> cumulative_hazard(const HazardSurface& hazard) {
  const auto& g = hazard.lattice.t_grid;
  const std::size_t nt = g.size();
  std::vector<double> cum(hazard.values.size());
  for (std::size_t x = 0; x < hazard.lattice.nx(); ++x) {
    const double* h = hazard.values.data() + x * nt;
    double* c = cum.data() + x * nt;
    c[0] = h[0] * g[0];
    for (std::size_t k = 1; k < nt; ++k) c[k] = c[k - 1] + 0.5 * (g[k] - g[k - 1]) * (h[k - 1] + h[k]);
  }
  return cum;
}

inline SurvivalCurve survival_from_hazard(const HazardSurface& hazard) {
  SurvivalCurve out{hazard.lattice, cumulative_hazard(hazard), {}, "trapezoid"};
  out.survival.resize(out.cumulative_hazard.size());
  for (std::size_t k = 0; k < out.survival.size(); ++k)
    out.survival[k] = std::clamp(std::exp(-out.cumulative_hazard[k]), 0.0, 1.0);
  return out;
}

/// F(t|x) = exp(-int_t^{t_max} r(s|x) ds) from a reverse-time hazard, with
/// the integral taken by trapezoid on the grid.
inline std::vector<double> distribution_from_reverse_hazard(const HazardSurface& reverse_hazard) {
  const auto& g = reverse_hazard.lattice.t_grid;
  const std::size_t nt = g.size();
  std::vector<double> out(reverse_hazard.values.size());
  for (std::size_t x = 0; x < reverse_hazard.lattice.nx(); ++x) {
    const double* r = reverse_hazard.values.data() + x * nt;
    double* F = out.data() + x * nt;
    double tail = 0.0;
    F[nt - 1] = 1.0;
    for (std::size_t k = nt - 1; k-- > 0;) {
      tail += 0.5 * (g[k + 1] - g[k]) * (r[k] + r[k + 1]);
      F[k] = std::clamp(std::exp(-tail), 0.0, 1.0);
    }
  }
  return out;
}

/// S(tau(x) | x) for each lattice covariate point, clamped to [0, 1]. For the
/// hazard of T including cured individuals this is the cure probability
/// 1 - phi(x).
inline std::vector<double> cure_probability(const HazardSurface& hazard, std::span<const double> tau) {
  const auto& g = hazard.lattice.t_grid;
  if (tau.size() != hazard.lattice.nx()) throw config_error("cure_probability: need one tau per covariate point");
  const auto cum = cumulative_hazard(hazard);
  std::vector<double> out(tau.size());
  for (std::size_t x = 0; x < tau.size(); ++x) {
    if (!(tau[x] > 0.0) || tau[x] > g.back()) throw config_error("cure_probability: tau outside the t grid");
    const auto nt = g.size();
    const double L = detail::interpolate_cumulative(g, std::span<const double>(cum).subspan(x * nt, nt),
                                                    hazard.curve(x), tau[x]);
    out[x] = std::clamp(std::exp(-L), 0.0, 1.0);
  }
  return out;
}

/// Hazard of the susceptibles under right censoring with a cure fraction:
///
///   lambda_0 = f / max(R - (1 - phi) * S_C * f_X + 1/n, 1/n)   on [0, tau(x)],
///
/// and 0 beyond tau(x). `cure_prob` holds 1 - phi(x) per covariate point;
/// `censor_survival` is the survival of C obtained by swapping the roles of T
/// and C; `fx_state` is a constant_one state estimating f_X.
inline HazardSurface assemble_hazard_cure(const AccumulatorState& f_state, const AccumulatorState& r_state,
                                          const SurvivalCurve& censor_survival, const AccumulatorState& fx_state,
                                          std::span<const double> cure_prob, std::span<const double> tau) {
  detail::require_compatible(f_state, r_state, "cure");
  detail::require_compatible(f_state, fx_state, "cure");
  detail::require_lattice(f_state.lattice(), censor_survival.lattice, "cure");
  const auto& lat = f_state.lattice();
  if (cure_prob.size() != lat.nx() || tau.size() != lat.nx())
    throw config_error("cure: need one cure probability and one tau per covariate point");
  for (double t : tau)
    if (!(t > 0.0) || t > lat.t_grid.back()) throw config_error("cure: tau outside the t grid");
  HazardSurface out{lat, std::vector<double>(lat.size(), 0.0), "cure_right_censoring", f_state.count(), {}};
  const double ridge = ridge_for(f_state.count());
  for (std::size_t x = 0; x < lat.nx(); ++x) {
    const double fx = fx_state.at(0, x);
    for (std::size_t t = 0; t < lat.nt() && lat.t_grid[t] <= tau[x]; ++t) {
      const auto k = lat.index(t, x);
      const double raw = r_state.values()[k] - cure_prob[x] * censor_survival.survival[k] * fx;
      double den = raw + ridge;
      if (den < ridge) {
        den = ridge;
        ++out.diagnostics.floored_points;
      }
      out.values[k] = safe_ratio(f_state.values()[k], den);
    }
  }
  return out;
}

/// Hazard of the susceptibles under LTRC with a cure fraction:
///
///   lambda_0 = f / max(W - (1 - phi) * W_C + 1/n, 1/n)   on [0, tau(x)],
///
/// with W from risk_window and W_C from censor_window states.
inline HazardSurface assemble_hazard_ltrc_cure(const AccumulatorState& f_state, const AccumulatorState& w_state,
                                               const AccumulatorState& wc_state, std::span<const double> cure_prob,
                                               std::span<const double> tau) {
  detail::require_compatible(f_state, w_state, "ltrc_cure");
  detail::require_compatible(f_state, wc_state, "ltrc_cure");
  const auto& lat = f_state.lattice();
  if (cure_prob.size() != lat.nx() || tau.size() != lat.nx())
    throw config_error("ltrc_cure: need one cure probability and one tau per covariate point");
  for (double t : tau)
    if (!(t > 0.0) || t > lat.t_grid.back()) throw config_error("ltrc_cure: tau outside the t grid");
  HazardSurface out{lat, std::vector<double>(lat.size(), 0.0), "ltrc_cure", f_state.count(), {}};
  const double ridge = ridge_for(f_state.count());
  for (std::size_t x = 0; x < lat.nx(); ++x) {
    for (std::size_t t = 0; t < lat.nt() && lat.t_grid[t] <= tau[x]; ++t) {
      const auto k = lat.index(t, x);
      const double raw = w_state.values()[k] - cure_prob[x] * wc_state.values()[k];
      double den = raw + ridge;
      if (den < ridge) {
        den = ridge;
        ++out.diagnostics.floored_points;
      }
      out.values[k] = safe_ratio(f_state.values()[k], den);
    }
  }
  return out;
}

/// p(x) = P(A=1 | x) / P(A in {1,2} | x) from two constant_one states
/// restricted to A=1 and A in {1,2}; ridged and clamped to [0, 1].
inline std::vector<double> mcs_exact_observation_probability(const AccumulatorState& pa1_state,
                                                             const AccumulatorState& pa12_state) {
  detail::require_compatible(pa1_state, pa12_state, "mcs p(x)");
  const double ridge = ridge_for(pa1_state.count());
  std::vector<double> p(pa1_state.lattice().nx());
  for (std::size_t x = 0; x < p.size(); ++x)
    p[x] = std::clamp(safe_ratio(pa1_state.at(0, x), pa12_state.at(0, x) + ridge), 0.0, 1.0);
  return p;
}

/// Modified current status hazard
///
///   lambda = f_A / (G_1 + p(x) G_0 + 1/n),
///
/// where f_A uses weights A(2-A) and G_k = P(Y >= t, A = k | x) f_X(x) comes
/// from at_risk states restricted to A = k.
inline HazardSurface assemble_hazard_mcs(const AccumulatorState& fa_state, const AccumulatorState& g1_state,
                                         const AccumulatorState& g0_state, std::span<const double> p_hat) {
  detail::require_compatible(fa_state, g1_state, "mcs");
  detail::require_compatible(fa_state, g0_state, "mcs");
  const auto& lat = fa_state.lattice();
  if (p_hat.size() != lat.nx()) throw config_error("mcs: need one p(x) per covariate point");
  HazardSurface out{lat, std::vector<double>(lat.size()), "modified_current_status", fa_state.count(), {}};
  const double ridge = ridge_for(fa_state.count());
  for (std::size_t x = 0; x < lat.nx(); ++x)
    for (std::size_t t = 0; t < lat.nt(); ++t) {
      const auto k = lat.index(t, x);
      out.values[k] = safe_ratio(fa_state.values()[k], g1_state.values()[k] + p_hat[x] * g0_state.values()[k] + ridge);
    }
  return out;
}

inline HazardSurface assemble_hazard_mcs(const AccumulatorState& fa_state, const AccumulatorState& g1_state,
                                         const AccumulatorState& g0_state, const AccumulatorState& pa1_state,
                                         const AccumulatorState& pa12_state) {
  const auto p = mcs_exact_observation_probability(pa1_state, pa12_state);
  return assemble_hazard_mcs(fa_state, g1_state, g0_state, p);
}

struct CifEstimate {
  HazardSurface intensity;  // S_T(t|x) * lambda_j(t|x)
  std::vector<double> cif;  // x-major, clamped to [0,1] and non-decreasing
};

/// Cumulative incidence of cause j.
///
/// The intensity is S_T(t|x) f_j(t|x) / E(1{Y >= t} | x); the covariate
/// density cancels between numerator and denominator, so it is computed as
/// S_T * f_j / (R + 1/n) from a cause_density state and an at_risk state.
/// `all_cause` must come from the all-cause hazard on the same lattice.
///
/// The CIF integrates the intensity segment by segment assuming the ratio of
/// the cause-specific to the all-cause hazard is constant on each segment:
///
///   CIF(t_k) - CIF(t_{k-1}) = (S(t_{k-1}) - S(t_k)) * dLambda_j / dLambda,
///
/// which is exact for piecewise-exponential survival and makes the CIFs of
/// all causes add up to 1 - S.
inline CifEstimate assemble_cif(const AccumulatorState& fj_state, const AccumulatorState& r_state,
                                const SurvivalCurve& all_cause) {
  detail::require_compatible(fj_state, r_state, "cif");
  detail::require_lattice(fj_state.lattice(), all_cause.lattice, "cif");
  auto cause_hazard = detail::ratio_surface(fj_state, r_state, "competing_risks");
  const auto cause_cum = cumulative_hazard(cause_hazard);
  const auto& lat = fj_state.lattice();
  const std::size_t nt = lat.nt();

  CifEstimate out{cause_hazard, std::vector<double>(lat.size())};
  for (std::size_t k = 0; k < out.intensity.values.size(); ++k) out.intensity.values[k] *= all_cause.survival[k];

  for (std::size_t x = 0; x < lat.nx(); ++x) {
    double s_prev = 1.0;
    double cum_prev = 0.0;
    double cj_prev = 0.0;
    double acc = 0.0;
    double running = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
      const auto k = lat.index(t, x);
      const double s = all_cause.survival[k];
      const double d_all = all_cause.cumulative_hazard[k] - cum_prev;
      const double d_j = cause_cum[k] - cj_prev;
      double inc;
      if (d_all > 0.0)
        inc = (s_prev - s) * (d_j / d_all);
      else
        inc = s_prev * d_j;
      acc += inc;
      running = std::max(running, std::clamp(acc, 0.0, 1.0));
      out.cif[k] = running;
      s_prev = s;
      cum_prev = all_cause.cumulative_hazard[k];
      cj_prev = cause_cum[k];
    }
  }
  return out;
}

}  // namespace hazardstream
