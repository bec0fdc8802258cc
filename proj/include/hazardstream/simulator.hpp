#pragma once

// Synthetic time-to-event data: proportional hazards (CPH) and accelerated
// failure time (AFT) models with a polynomial-plus-exponential baseline
// hazard, a breast-cancer-like covariate law and shifted exponential
// censoring calibrated to a target censoring fraction.
//
// Covariate vector used by the linear predictor, in order:
//   x1  transformed Beta mixture (continuous)
//   x2  Gamma(shape 0.38, rate 0.14) (continuous)
//   d1  medium tumour indicator, d2 large tumour indicator (small = reference)
//   d3  relapse indicator

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>

#include "hazardstream/data.hpp"
#include "hazardstream/errors.hpp"
#include "hazardstream/mechanism.hpp"

namespace hazardstream {

enum class ModelFamily : std::uint8_t { cph = 0, aft = 1 };

inline std::string_view to_string(ModelFamily f) { return f == ModelFamily::cph ? "cph" : "aft"; }

inline ModelFamily parse_model_family(std::string_view s) {
  if (s == "cph") return ModelFamily::cph;
  if (s == "aft") return ModelFamily::aft;
  throw config_error("unknown model family '" + std::string(s) + "'");
}

/// Baseline hazard lambda_0(t) = a1 + a2 t + a3 t^2 + a4 exp(a5 t).
inline double baseline_hazard(const std::array<double, 5>& a, double t) {
  return a[0] + a[1] * t + a[2] * t * t + a[3] * std::exp(a[4] * t);
}

/// Closed-form integral of the baseline hazard over [0, t].
inline double baseline_cumulative_hazard(const std::array<double, 5>& a, double t) {
  const double expo = a[4] == 0.0 ? a[3] * t : a[3] * std::expm1(a[4] * t) / a[4];
  return a[0] * t + a[1] * t * t / 2.0 + a[2] * t * t * t / 3.0 + expo;
}

struct CensoringLaw {
  double rate = 0.45;   // exponential rate
  double shift = 0.0;   // C = max(shift + Exp(rate), 0)

  friend bool operator==(const CensoringLaw&, const CensoringLaw&) = default;
};

/// Law of x1 = scale * A + offset with A ~ pi B(a1,b1) + (1-pi) B(a2,b2).
struct BetaMixtureLaw {
  double pi = 0.4;
  double a1 = 17, b1 = 10, a2 = 9, b2 = 14;
  double scale = 6.0;
  double offset = -3.0;

  friend bool operator==(const BetaMixtureLaw&, const BetaMixtureLaw&) = default;
};

struct CovariateLaw {
  BetaMixtureLaw x1;
  double gamma_shape = 0.38;
  double gamma_rate = 0.14;
  std::array<double, 3> tumour_probs{0.47, 0.10, 0.43};
  double relapse_prob = 0.51;

  friend bool operator==(const CovariateLaw&, const CovariateLaw&) = default;
};

struct SimModel {
  ModelFamily family = ModelFamily::cph;
  std::array<double, 5> beta{0.24, 0.04, -0.69, -0.32, 1.9};
  std::array<double, 5> alpha_base{-20.32, -1.51, -0.08, 20.32, 0.08};
  CovariateLaw covariates;
  CensoringLaw censoring;
  double target_censor_fraction = 0.2;
  double t_max = 8.0;
  std::uint64_t seed = 1;

  /// Certifies a nonnegative baseline on [0, t_max] (step 1e-3) and a valid censoring law.
  void validate() const {
    if (!(t_max > 0.0)) throw config_error("model: t_max must be positive");
    if (!(censoring.rate > 0.0)) throw config_error("model: censoring rate must be positive");
    if (!(target_censor_fraction > 0.0 && target_censor_fraction < 1.0))
      throw config_error("model: target censoring fraction must lie in (0, 1)");
    const auto steps = static_cast<std::size_t>(std::ceil(t_max / 1e-3));
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = std::min(t_max, static_cast<double>(k) * 1e-3);
      if (baseline_hazard(alpha_base, t) < -1e-12)
        throw config_error("model: baseline hazard is negative at t=" + std::to_string(t));
    }
  }

  friend bool operator==(const SimModel&, const SimModel&) = default;
};

/// Model 1 (cph) or Model 2 (aft, coefficients divided by 4).
inline SimModel paper_model(ModelFamily family) {
  SimModel m;
  m.family = family;
  if (family == ModelFamily::aft)
    for (double& b : m.beta) b /= 4.0;
  return m;
}

/// Full covariate vector (x1, x2, d1, d2, d3) for the linear predictor.
inline double linear_predictor(const SimModel& m, const CovariatePoint& x) {
  if (x.x_c.size() != 2 || x.x_d.size() != 3) throw config_error("model: expected covariates (x1, x2 | d1, d2, d3)");
  return m.beta[0] * x.x_c[0] + m.beta[1] * x.x_c[1] + m.beta[2] * x.x_d[0] + m.beta[3] * x.x_d[1] +
         m.beta[4] * x.x_d[2];
}

inline double true_hazard(const SimModel& m, double t, const CovariatePoint& x) {
  const double s = std::exp(linear_predictor(m, x));
  return m.family == ModelFamily::cph ? baseline_hazard(m.alpha_base, t) * s
                                      : baseline_hazard(m.alpha_base, t * s) * s;
}

inline double true_cumulative_hazard(const SimModel& m, double t, const CovariatePoint& x) {
  const double s = std::exp(linear_predictor(m, x));
  return m.family == ModelFamily::cph ? baseline_cumulative_hazard(m.alpha_base, t) * s
                                      : baseline_cumulative_hazard(m.alpha_base, t * s);
}

inline double true_survival(const SimModel& m, double t, const CovariatePoint& x) {
  return std::exp(-true_cumulative_hazard(m, t, x));
}

/// Survival of the shifted exponential censoring time at t (P(C >= t), continuous).
inline double censoring_survival(const CensoringLaw& c, double t) {
  if (t <= 0.0) return 1.0;
  if (t <= c.shift) return 1.0;
  return std::exp(-c.rate * (t - c.shift));
}

// ---------------------------------------------------------------------------
// Covariate law: sampling, density, moments and quantiles

inline double beta_mixture_cdf(const BetaMixtureLaw& b, double a) {
  if (a <= 0.0) return 0.0;
  if (a >= 1.0) return 1.0;
  namespace bm = boost::math;
  return b.pi * bm::cdf(bm::beta_distribution<>(b.a1, b.b1), a) +
         (1.0 - b.pi) * bm::cdf(bm::beta_distribution<>(b.a2, b.b2), a);
}

inline double x1_density(const BetaMixtureLaw& b, double x1) {
  const double a = (x1 - b.offset) / b.scale;
  if (a <= 0.0 || a >= 1.0) return 0.0;
  namespace bm = boost::math;
  const double fa = b.pi * bm::pdf(bm::beta_distribution<>(b.a1, b.b1), a) +
                    (1.0 - b.pi) * bm::pdf(bm::beta_distribution<>(b.a2, b.b2), a);
  return fa / std::abs(b.scale);
}

inline double x1_quantile(const BetaMixtureLaw& b, double q) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (beta_mixture_cdf(b, mid) < q ? lo : hi) = mid;
  }
  const double a = 0.5 * (lo + hi);
  return b.scale * a + b.offset;
}

inline double x1_mean(const BetaMixtureLaw& b) {
  const double m = b.pi * b.a1 / (b.a1 + b.b1) + (1.0 - b.pi) * b.a2 / (b.a2 + b.b2);
  return b.scale * m + b.offset;
}

inline double x1_sd(const BetaMixtureLaw& b) {
  auto second = [](double a, double bb) { return a * (a + 1.0) / ((a + bb) * (a + bb + 1.0)); };
  const double m = b.pi * b.a1 / (b.a1 + b.b1) + (1.0 - b.pi) * b.a2 / (b.a2 + b.b2);
  const double m2 = b.pi * second(b.a1, b.b1) + (1.0 - b.pi) * second(b.a2, b.b2);
  return std::abs(b.scale) * std::sqrt(m2 - m * m);
}

inline double x2_density(const CovariateLaw& law, double x2) {
  if (x2 <= 0.0) return 0.0;
  namespace bm = boost::math;
  return bm::pdf(bm::gamma_distribution<>(law.gamma_shape, 1.0 / law.gamma_rate), x2);
}

inline double x2_quantile(const CovariateLaw& law, double q) {
  namespace bm = boost::math;
  return bm::quantile(bm::gamma_distribution<>(law.gamma_shape, 1.0 / law.gamma_rate), q);
}

inline double x2_mean(const CovariateLaw& law) { return law.gamma_shape / law.gamma_rate; }
inline double x2_sd(const CovariateLaw& law) { return std::sqrt(law.gamma_shape) / law.gamma_rate; }

/// Probability mass of a discrete covariate combination (d1, d2, d3).
inline double discrete_mass(const CovariateLaw& law, std::span<const int> d) {
  double pt = 0.0;
  if (d[0] == 0 && d[1] == 0) pt = law.tumour_probs[0];
  else if (d[0] == 1 && d[1] == 0) pt = law.tumour_probs[1];
  else if (d[0] == 0 && d[1] == 1) pt = law.tumour_probs[2];
  const double pr = d[2] == 1 ? law.relapse_prob : (d[2] == 0 ? 1.0 - law.relapse_prob : 0.0);
  return pt * pr;
}

/// Joint density of X (Lebesgue in x1, x2 times counting in the indicators).
inline double covariate_density(const CovariateLaw& law, const CovariatePoint& x) {
  return x1_density(law.x1, x.x_c[0]) * x2_density(law, x.x_c[1]) * discrete_mass(law, x.x_d);
}

/// The six tumour x relapse combinations, small tumour first.
inline std::vector<std::vector<int>> discrete_support() {
  return {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
}

/// Standardization from the population mean and standard deviation of x1, x2.
inline Standardization population_standardization(const CovariateLaw& law) {
  Standardization s;
  s.center_scale = {{x1_mean(law.x1), x1_sd(law.x1)}, {x2_mean(law), x2_sd(law)}};
  return s;
}

inline CovariatePoint sample_covariates(const CovariateLaw& law, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto& b = law.x1;
  const bool first = unif(rng) < b.pi;
  const double ga = first ? b.a1 : b.a2;
  const double gb = first ? b.b1 : b.b2;
  std::gamma_distribution<double> g1(ga, 1.0), g2(gb, 1.0);
  const double u1 = g1(rng);
  const double u2 = g2(rng);
  const double a = u1 / (u1 + u2);
  std::gamma_distribution<double> gx(law.gamma_shape, 1.0 / law.gamma_rate);
  const double x2 = gx(rng);
  const double ut = unif(rng);
  int d1 = 0, d2 = 0;
  if (ut >= law.tumour_probs[0] + law.tumour_probs[1]) d2 = 1;
  else if (ut >= law.tumour_probs[0]) d1 = 1;
  const int d3 = unif(rng) < law.relapse_prob ? 1 : 0;
  return {{b.scale * a + b.offset, x2}, {d1, d2, d3}};
}

inline CovariatePoint sample_covariates(const SimModel& m, std::mt19937_64& rng) {
  return sample_covariates(m.covariates, rng);
}

// ---------------------------------------------------------------------------
// Event times

struct EventDraw {
  double t;
  bool overflow;  // T > t_max: reported as t_max
};

/// Inverse transform: returns T with S(T|x) = u, found by safeguarded Newton
/// iterations on the closed-form cumulative hazard over [0, t_max].
inline EventDraw event_time_from_uniform(const SimModel& m, const CovariatePoint& x, double u) {
  if (!(u > 0.0 && u <= 1.0)) throw config_error("event time: uniform must lie in (0, 1]");
  const double target = -std::log(u);
  if (target == 0.0) return {0.0, false};
  if (true_cumulative_hazard(m, m.t_max, x) < target) return {m.t_max, true};
  double lo = 0.0, hi = m.t_max;
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double g = true_cumulative_hazard(m, t, x) - target;
    if (g > 0.0) hi = t; else lo = t;
    if (std::abs(g) <= 1e-13 * std::max(1.0, target) || hi - lo <= 1e-14 * std::max(1.0, hi)) break;
    const double d = true_hazard(m, t, x);
    double next = d > 0.0 ? t - g / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  return {t, false};
}

inline EventDraw sample_event_time(const SimModel& m, const CovariatePoint& x, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u == 0.0) u = unif(rng);
  return event_time_from_uniform(m, x, u);
}

inline double sample_censoring_time(const CensoringLaw& c, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(c.rate);
  return std::max(0.0, c.shift + e(rng));
}

// ---------------------------------------------------------------------------
// Datasets

/// Extras needed by the non-right-censoring mechanisms.
struct MechanismSimParams {
  MechanismKind kind = MechanismKind::right_censoring;
  double truncation_max = 1.0;      // L ~ Uniform(0, truncation_max)   (ltrc kinds)
  double cure_fraction = 0.0;       // P(T = infinity)                   (cure kinds)
  double exact_probability = 1.0;   // p(x) = P(Delta = 1), constant     (mcs)
  std::vector<double> cause_weights{1.0};  // P(cause = j), independent of T (competing risks)
  double min_acceptance = 1e-3;

  friend bool operator==(const MechanismSimParams&, const MechanismSimParams&) = default;
};

struct LatentDraw {
  double t;  // +infinity for cured individuals
  double c;
  bool overflow;
};

/// Streaming generator of observations; one owned RNG per generator.
class DatasetGenerator {
 public:
  DatasetGenerator(SimModel model, MechanismSimParams mech, std::uint64_t seed)
      : model_(std::move(model)), mech_(std::move(mech)), rng_(seed) {
    model_.validate();
    if (mech_.cure_fraction < 0.0 || mech_.cure_fraction >= 1.0)
      throw config_error("simulation: cure fraction must lie in [0, 1)");
    if (mech_.exact_probability <= 0.0 || mech_.exact_probability > 1.0)
      throw config_error("simulation: p(x) must lie in (0, 1]");
    if (mech_.cause_weights.empty()) throw config_error("simulation: at least one cause weight required");
    double total = 0.0;
    for (double w : mech_.cause_weights) {
      if (!(w >= 0.0)) throw config_error("simulation: cause weights must be nonnegative");
      total += w;
    }
    if (!(total > 0.0)) throw config_error("simulation: cause weights sum to zero");
    cause_cdf_.reserve(mech_.cause_weights.size());
    double acc = 0.0;
    for (double w : mech_.cause_weights) cause_cdf_.push_back(acc += w / total);
  }

  /// Next accepted observation; `latent` receives the underlying draws.
  Observation next(LatentDraw* latent = nullptr) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const bool truncated = mech_.kind == MechanismKind::ltrc || mech_.kind == MechanismKind::ltrc_cure;
    for (;;) {
      ++attempts_;
      auto x = sample_covariates(model_, rng_);
      const bool cured = (mech_.kind == MechanismKind::cure_right_censoring || mech_.kind == MechanismKind::ltrc_cure) &&
                         unif(rng_) < mech_.cure_fraction;
      EventDraw ev{std::numeric_limits<double>::infinity(), false};
      if (!cured) ev = sample_event_time(model_, x, rng_);
      const double c = sample_censoring_time(model_.censoring, rng_);
      const double l = truncated ? unif(rng_) * mech_.truncation_max : 0.0;
      if (ev.overflow) ++overflow_;
      if (latent) *latent = {ev.t, c, ev.overflow};

      // Event observable only when it happens before the horizon.
      const bool event_seen = !cured && !ev.overflow;
      const double t_eff = event_seen ? ev.t : std::numeric_limits<double>::infinity();
      Observation obs;
      obs.x_c = std::move(x.x_c);
      obs.x_d = std::move(x.x_d);
      switch (mech_.kind) {
        case MechanismKind::left_censoring: {
          const double t_cap = std::min(ev.t, model_.t_max);
          obs.y = std::max(t_cap, c);
          obs.status = t_cap >= c ? 1 : 0;
          break;
        }
        case MechanismKind::modified_current_status: {
          const double c_cap = std::min(c, model_.t_max);
          if (c_cap < t_eff) {
            obs.y = c_cap;
            obs.status = 0;
          } else if (unif(rng_) < mech_.exact_probability) {
            obs.y = t_eff;
            obs.status = 1;
          } else {
            obs.y = c_cap;
            obs.status = 2;
          }
          break;
        }
        default: {
          const double c_cap = std::min(c, model_.t_max);
          obs.y = std::min(t_eff, c_cap);
          obs.status = t_eff <= c_cap ? 1 : 0;
          if (mech_.kind == MechanismKind::competing_risks && obs.status == 1) {
            const double u = unif(rng_);
            int j = 1;
            while (j < static_cast<int>(cause_cdf_.size()) && u >= cause_cdf_[j - 1]) ++j;
            obs.cause = j;
          }
          break;
        }
      }
      if (truncated) {
        if (l > obs.y) {
          check_acceptance();
          continue;
        }
        obs.l = l;
        if (mech_.kind == MechanismKind::ltrc_cure) obs.c_obs = std::min(c, model_.t_max);
      }
      ++accepted_;
      return obs;
    }
  }

  [[nodiscard]] std::uint64_t attempts() const { return attempts_; }
  [[nodiscard]] std::uint64_t accepted() const { return accepted_; }
  [[nodiscard]] std::uint64_t overflow_count() const { return overflow_; }
  [[nodiscard]] const SimModel& model() const { return model_; }

 private:
  void check_acceptance() const {
    if (attempts_ >= 10000 && static_cast<double>(accepted_) < mech_.min_acceptance * static_cast<double>(attempts_))
      throw data_error("simulation: truncation acceptance probability below " + std::to_string(mech_.min_acceptance));
  }

  SimModel model_;
  MechanismSimParams mech_;
  std::mt19937_64 rng_;
  std::vector<double> cause_cdf_;
  std::uint64_t attempts_ = 0;
  std::uint64_t accepted_ = 0;
  std::uint64_t overflow_ = 0;
};

struct Dataset {
  std::vector<Observation> rows;
  std::vector<LatentDraw> latent;  // filled when requested
  std::uint64_t overflow = 0;
  std::uint64_t attempts = 0;

  [[nodiscard]] double censored_fraction() const {
    if (rows.empty()) return 0.0;
    std::size_t c = 0;
    for (const auto& r : rows) c += r.status != 1;
    return static_cast<double>(c) / static_cast<double>(rows.size());
  }
};

inline Dataset generate_dataset(const SimModel& model, std::size_t n, const MechanismSimParams& mech,
                                std::uint64_t seed, bool keep_latent = false) {
  DatasetGenerator gen(model, mech, seed);
  Dataset out;
  out.rows.reserve(n);
  if (keep_latent) out.latent.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LatentDraw lat{};
    out.rows.push_back(gen.next(keep_latent ? &lat : nullptr));
    if (keep_latent) out.latent.push_back(lat);
  }
  out.overflow = gen.overflow_count();
  out.attempts = gen.attempts();
  return out;
}

/// Right-censoring data with the model's own censoring law.
inline Dataset generate_dataset(const SimModel& model, std::size_t n, std::uint64_t seed) {
  return generate_dataset(model, n, MechanismSimParams{}, seed);
}

/// Shift mu_C such that the censored fraction P(delta = 0) of right-censored
/// data hits `target`. Bisection over mu_C with common random numbers
/// (`draws` latent (T, Exp) pairs).
inline double calibrate_censoring_shift(const SimModel& model, double target, std::uint64_t seed,
                                        std::size_t draws = 200000) {
  model.validate();
  if (!(target > 0.0 && target < 1.0)) throw config_error("calibration: target must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(model.censoring.rate);
  std::vector<double> t(draws), ec(draws);
  for (std::size_t k = 0; k < draws; ++k) {
    const auto x = sample_covariates(model, rng);
    const auto ev = sample_event_time(model, x, rng);
    t[k] = ev.overflow ? std::numeric_limits<double>::infinity() : ev.t;
    ec[k] = e(rng);
  }
  auto censored = [&](double shift) {
    std::size_t c = 0;
    for (std::size_t k = 0; k < draws; ++k) {
      const double cc = std::min(std::max(0.0, shift + ec[k]), model.t_max);
      c += !(t[k] <= cc);
    }
    return static_cast<double>(c) / static_cast<double>(draws);
  };
  double lo = -model.t_max - 50.0 / model.censoring.rate;
  double hi = model.t_max;
  const double f_lo = censored(lo), f_hi = censored(hi);
  if (!(f_hi <= target && target <= f_lo))
    throw config_error("calibration: target " + std::to_string(target) + " not bracketed by [" +
                       std::to_string(f_hi) + ", " + std::to_string(f_lo) + "]");
  for (int it = 0; it < 100 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    (censored(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Population quantiles of x1, x2 crossed with the six indicator patterns.
inline std::vector<CovariatePoint> quantile_covariate_grid(const CovariateLaw& law,
                                                           std::vector<double> probs = {0.25, 0.5, 0.75}) {
  std::vector<double> q1, q2;
  for (double p : probs) {
    q1.push_back(x1_quantile(law.x1, p));
    q2.push_back(x2_quantile(law, p));
  }
  return covariate_grid({q1, q2}, discrete_support());
}

}  // namespace hazardstream
