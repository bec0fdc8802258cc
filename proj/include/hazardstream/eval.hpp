#pragma once

// Evaluation against the simulator's analytic truth: the MISE criterion,
// leading-order bias and variance, bandwidth constants, and the replication
// benchmark.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hazardstream/data.hpp"
#include "hazardstream/errors.hpp"
#include "hazardstream/estimator.hpp"
#include "hazardstream/hazard.hpp"
#include "hazardstream/kernel.hpp"
#include "hazardstream/simulator.hpp"

namespace hazardstream {

/// True hazard of the model on every lattice point, x-major.
inline std::vector<double> truth_surface(const SimModel& model, const EvaluationLattice& lattice) {
  std::vector<double> out(lattice.size());
  for (std::size_t x = 0; x < lattice.nx(); ++x)
    for (std::size_t t = 0; t < lattice.nt(); ++t)
      out[lattice.index(t, x)] = true_hazard(model, lattice.t_grid[t], lattice.x_points[x]);
  return out;
}

inline double mise(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || estimate.empty()) throw config_error("mise: size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    const double d = estimate[k] - truth[k];
    acc += d * d;
  }
  return acc / static_cast<double>(estimate.size());
}

inline double mise(const HazardSurface& estimate, const SimModel& truth) {
  return mise(estimate.values, truth_surface(truth, estimate.lattice));
}

/// Ratio of the recursive to the non-recursive optimal bandwidth constant.
inline double shrink_factor_cr(double beta, int d_c) {
  if (beta < 0.0 || d_c < 1) throw config_error("shrink_factor_cr: need beta >= 0 and d_c >= 1");
  const double d = d_c;
  const double num = d * (1.0 + beta) + 5.0 * beta + 3.0;
  const double den = (d + 5.0) * (2.0 * d * (1.0 + beta) + 10.0 * beta + 6.0);
  return std::pow(num * num / den, 1.0 / (d + 5.0));
}

/// Bandwidth constant minimising the leading AMSE of the numerator
/// estimator, with p = d_c + 1 and alpha = 1/(p + 4).
inline double optimal_c(double beta, int d_c, double f_val, double hessian_trace, const KernelSpec& kernel) {
  if (hessian_trace == 0.0) throw config_error("optimal_c: zero Hessian trace");
  if (!(f_val > 0.0)) throw config_error("optimal_c: density value must be positive");
  const int p = d_c + 1;
  const double alpha = 1.0 / (p + 4.0);
  const double a = 1.0 + beta - 2.0 * alpha;
  const double m = kernel.second_moment() * hessian_trace;
  const double v = p * a * a * kernel.product_roughness(p) * f_val / ((1.0 + alpha * p + 2.0 * beta) * m * m);
  return std::pow(v, 1.0 / (p + 4.0));
}

/// Rule-of-thumb numerator constant c_r(beta) * P(delta = 1)^{1/(d_c + 5)}.
inline double rule_of_thumb_c(double beta, int d_c, double uncensored_fraction) {
  if (!(uncensored_fraction > 0.0 && uncensored_fraction <= 1.0))
    throw config_error("rule_of_thumb_c: uncensored fraction must lie in (0, 1]");
  return shrink_factor_cr(beta, d_c) * std::pow(uncensored_fraction, 1.0 / (d_c + 5.0));
}

struct BandwidthPreset {
  double c_numerator;
  double c_denominator;
};

/// Preset constants for 20, 40 and 60 percent censoring.
inline BandwidthPreset paper_preset(int censoring_percent) {
  switch (censoring_percent) {
    case 20: return {0.656, 0.875};
    case 40: return {0.753, 0.875};
    case 60: return {0.948, 0.875};
    default: throw config_error("preset: censoring level must be 20, 40 or 60");
  }
}

// ---------------------------------------------------------------------------
// Analytic densities of the simulated right-censoring design

/// f_{Y,delta,X}(t, 1, x) = lambda S_T S_C f_X for t < t_max.
inline double joint_uncensored_density(const SimModel& m, double t, const CovariatePoint& x) {
  if (t < 0.0 || t >= m.t_max) return 0.0;
  return true_hazard(m, t, x) * true_survival(m, t, x) * censoring_survival(m.censoring, t) *
         covariate_density(m.covariates, x);
}

/// R(t, x) = P(Y >= t | x) f_X(x).
inline double natural_nuisance(const SimModel& m, double t, const CovariatePoint& x) {
  if (t > m.t_max) return 0.0;
  return true_survival(m, t, x) * censoring_survival(m.censoring, t) * covariate_density(m.covariates, x);
}

struct BiasVariance {
  double bias;
  double variance;
};

/// Closed-form leading terms from precomputed f, its Hessian trace and R.
inline BiasVariance theoretical_bias_variance_from(double f_val, double trace, double r,
                                                   const EstimatorConfig& config, std::uint64_t n) {
  if (r < 1e-6) throw config_error("bias/variance: R below 1e-6 outside the positivity region");
  const double c = config.numerator.c;
  const double alpha = config.numerator.alpha;
  const int p = config.numerator.p;
  const double beta = config.weights.beta;
  const double nn = static_cast<double>(n);
  const double bias = c * c * std::pow(nn, -2.0 * alpha) * (1.0 + beta) / (2.0 * (1.0 + beta - 2.0 * alpha)) *
                      config.kernel.second_moment() * trace / r;
  const double var = config.kernel.product_roughness(p) * std::pow(nn, -(1.0 - alpha * p)) * (1.0 + beta) *
                     (1.0 + beta) / ((1.0 + alpha * p + 2.0 * beta) * std::pow(c, p)) * f_val / (r * r);
  return {bias, var};
}

/// Leading bias and variance of the numerator/denominator hazard estimator
/// at (t, x) for sample size n. Densities are taken on the standardized
/// scale of `st` (the scale the kernels act on); the Hessian trace of the
/// uncensored joint density uses central differences with step 1e-3.
inline BiasVariance theoretical_bias_variance(double t, const CovariatePoint& x, const SimModel& truth,
                                              const EstimatorConfig& config, const Standardization& st,
                                              std::uint64_t n) {
  const std::size_t dc = x.x_c.size();
  if (n == 0) throw config_error("bias/variance: n must be positive");
  st.validate(dc);
  double jac = st.time_scale;
  std::vector<double> scale(dc, 1.0);
  for (std::size_t j = 0; j < dc && !st.empty(); ++j) scale[j] = st.center_scale[j].second;
  for (double s : scale) jac *= s;

  const double r = natural_nuisance(truth, t, x) * jac / st.time_scale;
  if (r < 1e-6) throw config_error("bias/variance: R below 1e-6 outside the positivity region");
  auto f = [&](double tt, const std::vector<double>& xc) {
    return joint_uncensored_density(truth, tt, {xc, x.x_d}) * jac;
  };
  const double step = 1e-3;
  const double f0 = f(t, x.x_c);
  double trace = 0.0;
  {
    const double ht = step * st.time_scale;
    trace += (f(t + ht, x.x_c) - 2.0 * f0 + f(t - ht, x.x_c)) / (step * step);
  }
  for (std::size_t j = 0; j < dc; ++j) {
    auto up = x.x_c, dn = x.x_c;
    up[j] += step * scale[j];
    dn[j] -= step * scale[j];
    trace += (f(t, up) - 2.0 * f0 + f(t, dn)) / (step * step);
  }
  // f / R is the hazard per standardized time unit; map back to original time.
  const auto bv = theoretical_bias_variance_from(f0, trace, r, config, n);
  return {bv.bias / st.time_scale, bv.variance / (st.time_scale * st.time_scale)};
}

// ---------------------------------------------------------------------------
// Benchmark

/// 100 points on [0.1, 8] crossed with the 25/50/75% quantiles of x1, x2 and
/// the six indicator patterns (54 covariate points); continuous covariates
/// standardized by their population moments.
inline EvaluationLattice paper_default_lattice(const SimModel& model) {
  return EvaluationLattice(equidistant_grid(0.1, 8.0, 100), quantile_covariate_grid(model.covariates),
                           population_standardization(model.covariates));
}

struct BenchPlan {
  SimModel model = paper_model(ModelFamily::cph);
  std::vector<std::size_t> sample_sizes{200, 400, 1000, 2000};
  std::size_t replications = 100;
  std::vector<double> censor_targets{0.2};
  EvaluationLattice lattice;   // empty: default benchmark lattice
  /// Bandwidth constants per censoring target (key: percent). Missing keys
  /// fall back to the built-in presets.
  std::map<int, BandwidthPreset> presets;
  KernelSpec kernel;
  double beta = 0.0;
  bool boundary_reflection = true;
  std::uint64_t seed = 20240101;
  std::size_t calibration_draws = 200000;
  unsigned threads = 0;  // 0: HAZARDSTREAM_THREADS or hardware concurrency
  bool collect_mean_curves = false;
};

struct BenchRow {
  std::string model;
  double censor_target = 0.0;
  std::size_t n = 0;
  std::size_t replications = 0;
  double mise_median = 0.0;
  double mise_q25 = 0.0;
  double mise_q75 = 0.0;
  std::uint64_t seed = 0;
  std::size_t failures = 0;
  double censored_fraction = 0.0;  // mean over replications
  double shift = 0.0;
  std::vector<double> mean_estimate;  // x-major, filled when collect_mean_curves
};

struct BenchResult {
  EvaluationLattice lattice;
  std::vector<double> truth;
  std::vector<BenchRow> rows;
};

/// Linear-interpolation sample quantile (type 7).
inline double sample_quantile(std::vector<double> v, double q) {
  if (v.empty()) throw config_error("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Least-squares slope of log(y) on log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw config_error("slope: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline unsigned bench_threads(unsigned requested) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HAZARDSTREAM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
  }
  return requested == 0 ? hw : std::min(requested, hw);
}

/// Fits the right-censoring estimator on one simulated dataset and returns
/// its hazard surface.
inline HazardSurface fit_replication(const SimModel& model, const EvaluationLattice& lattice,
                                     const EstimatorConfig& config, std::size_t n, std::uint64_t seed,
                                     double* censored = nullptr) {
  MechanismEstimator est(lattice, config);
  DatasetGenerator gen(model, MechanismSimParams{}, seed);
  std::size_t cens = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto obs = gen.next();
    cens += obs.status != 1;
    est.update(obs);
  }
  if (censored) *censored = static_cast<double>(cens) / static_cast<double>(std::max<std::size_t>(n, 1));
  return est.assemble().hazard;
}

/// Median and interquartile range of the MISE over replications for every
/// (censoring target, n). Seeds depend only on the master seed and the cell,
/// so results do not depend on the thread count.
inline BenchResult run_bench(const BenchPlan& plan) {
  if (plan.replications < 1) throw config_error("bench: replications must be >= 1");
  if (plan.sample_sizes.empty()) throw config_error("bench: no sample sizes");
  if (plan.censor_targets.empty()) throw config_error("bench: no censoring targets");
  for (auto n : plan.sample_sizes)
    if (n < 1) throw config_error("bench: sample sizes must be >= 1");
  BenchResult result;
  result.lattice = plan.lattice.t_grid.empty() ? paper_default_lattice(plan.model) : plan.lattice;
  result.truth = truth_surface(plan.model, result.lattice);
  const auto& lat = result.lattice;
  const unsigned threads = bench_threads(plan.threads);

  for (std::size_t ci = 0; ci < plan.censor_targets.size(); ++ci) {
    const double target = plan.censor_targets[ci];
    const int pct = static_cast<int>(std::lround(target * 100.0));
    BandwidthPreset preset{};
    if (auto it = plan.presets.find(pct); it != plan.presets.end()) preset = it->second;
    else preset = paper_preset(pct);
    SimModel model = plan.model;
    model.target_censor_fraction = target;
    model.censoring.shift =
        calibrate_censoring_shift(model, target, splitmix64(plan.seed ^ (0xC0FFEEULL + ci)), plan.calibration_draws);
    auto config = make_estimator_config(MechanismKind::right_censoring, lat.d_c(), preset.c_numerator,
                                        preset.c_denominator);
    config.kernel = plan.kernel;
    config.weights.beta = plan.beta;
    config.boundary_reflection = plan.boundary_reflection;

    for (std::size_t ni = 0; ni < plan.sample_sizes.size(); ++ni) {
      const std::size_t n = plan.sample_sizes[ni];
      const std::uint64_t cell_seed = splitmix64(plan.seed ^ splitmix64((ci << 32) ^ (ni << 16) ^ 0x5EEDULL));
      std::vector<double> mises(plan.replications, std::nan(""));
      std::vector<double> cens(plan.replications, 0.0);
      std::vector<double> sum_est(plan.collect_mean_curves ? lat.size() : 0, 0.0);
      std::atomic<std::size_t> next{0};
      std::mutex mtx;
      auto worker = [&] {
        std::vector<double> local(sum_est.size(), 0.0);
        for (std::size_t r; (r = next.fetch_add(1)) < plan.replications;) {
          try {
            const auto h = fit_replication(model, lat, config, n, splitmix64(cell_seed + r), &cens[r]);
            mises[r] = mise(h.values, result.truth);
            for (std::size_t k = 0; k < local.size(); ++k) local[k] += h.values[k];
          } catch (const std::exception&) {
            mises[r] = std::nan("");
          }
        }
        std::lock_guard lock(mtx);
        for (std::size_t k = 0; k < local.size(); ++k) sum_est[k] += local[k];
      };
      std::vector<std::thread> pool;
      for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
      worker();
      for (auto& th : pool) th.join();

      std::vector<double> ok;
      double cens_sum = 0.0;
      for (std::size_t r = 0; r < mises.size(); ++r)
        if (std::isfinite(mises[r])) {
          ok.push_back(mises[r]);
          cens_sum += cens[r];
        }
      const std::size_t failures = plan.replications - ok.size();
      if (static_cast<double>(failures) > 0.05 * static_cast<double>(plan.replications))
        throw data_error("bench: " + std::to_string(failures) + " of " + std::to_string(plan.replications) +
                         " replications failed");
      BenchRow row;
      row.model = std::string(to_string(model.family));
      row.censor_target = target;
      row.n = n;
      row.replications = ok.size();
      row.mise_median = sample_quantile(ok, 0.5);
      row.mise_q25 = sample_quantile(ok, 0.25);
      row.mise_q75 = sample_quantile(ok, 0.75);
      row.seed = cell_seed;
      row.failures = failures;
      row.censored_fraction = cens_sum / static_cast<double>(ok.size());
      row.shift = model.censoring.shift;
      if (plan.collect_mean_curves) {
        row.mean_estimate = std::move(sum_est);
        for (double& v : row.mean_estimate) v /= static_cast<double>(ok.size());
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

inline void write_bench_csv(std::ostream& os, const BenchResult& result) {
  os << "model,censor_target,n,replications,mise_median,mise_q25,mise_q75,seed\n";
  os.precision(10);
  for (const auto& r : result.rows)
    os << r.model << ',' << r.censor_target << ',' << r.n << ',' << r.replications << ',' << r.mise_median << ','
       << r.mise_q25 << ',' << r.mise_q75 << ',' << r.seed << '\n';
}

/// Long-format mean estimate next to the truth for every (t, x) point.
inline void write_plot_data(std::ostream& os, const BenchResult& result) {
  const auto& lat = result.lattice;
  os << "model,censor_target,n,x_index,t,mean_estimate,truth\n";
  os.precision(10);
  for (const auto& r : result.rows) {
    if (r.mean_estimate.empty()) continue;
    for (std::size_t x = 0; x < lat.nx(); ++x)
      for (std::size_t t = 0; t < lat.nt(); ++t) {
        const auto k = lat.index(t, x);
        os << r.model << ',' << r.censor_target << ',' << r.n << ',' << x << ',' << lat.t_grid[t] << ','
           << r.mean_estimate[k] << ',' << result.truth[k] << '\n';
      }
  }
}

}  // namespace hazardstream
