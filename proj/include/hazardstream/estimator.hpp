#pragma once

// A bundle of accumulator states for one incompleteness mechanism, fed by a
// single observation stream, plus the assembly of the final estimates.
//
//   right_censoring          f (density, delta), R (at risk)
//   left_censoring           f (density, delta = 1{T >= C}), H (cdf)
//   cure_right_censoring     f, R, f_C (density with delta flipped), f_X
//   ltrc                     f, W (risk window)
//   ltrc_cure                f, W, W_C (censor window)
//   modified_current_status  f_A (weights A(2-A)), G_1, G_0 (at risk, A = 1 / A = 0),
//                            P_1, P_12 (constant, A = 1 / A in {1,2})
//   competing_risks          f (all causes), R, f_j for j = 1..J

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hazardstream/accumulator.hpp"
#include "hazardstream/binary_io.hpp"
#include "hazardstream/data.hpp"
#include "hazardstream/errors.hpp"
#include "hazardstream/hazard.hpp"
#include "hazardstream/kernel.hpp"
#include "hazardstream/mechanism.hpp"

namespace hazardstream {

struct EstimatorConfig {
  MechanismKind mechanism = MechanismKind::right_censoring;
  KernelSpec kernel;
  BandwidthSchedule numerator{1.0, 0.2, 1};    // states smoothing in t, p = d_c + 1
  BandwidthSchedule denominator{1.0, 0.2, 1};  // all other states, p = d_c
  WeightScheme weights;
  bool boundary_reflection = false;
  std::vector<double> tau;  // cure kinds: one value, or one per covariate point
  int causes = 1;           // competing risks: J

  friend bool operator==(const EstimatorConfig&, const EstimatorConfig&) = default;
};

/// Numerator/denominator schedules with alpha = 1/(4 + p) for a lattice with d_c continuous covariates.
inline EstimatorConfig make_estimator_config(MechanismKind kind, std::size_t d_c, double c_num, double c_den) {
  EstimatorConfig cfg;
  cfg.mechanism = kind;
  const int p_num = static_cast<int>(d_c) + 1;
  const int p_den = static_cast<int>(d_c);
  cfg.numerator = {c_num, 1.0 / (4.0 + p_num), p_num};
  cfg.denominator = {c_den, 1.0 / (4.0 + p_den), p_den};
  return cfg;
}

namespace detail {

inline void write_estimator_config(ByteWriter& w, const EstimatorConfig& c) {
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.mechanism));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.kernel.family));
  for (const auto* b : {&c.numerator, &c.denominator}) {
    w.put<double>(b->c);
    w.put<double>(b->alpha);
    w.put<std::int32_t>(b->p);
  }
  w.put<double>(c.weights.beta);
  w.put<std::uint8_t>(c.boundary_reflection ? 1 : 0);
  w.put_doubles(c.tau);
  w.put<std::int32_t>(c.causes);
}

inline EstimatorConfig read_estimator_config(ByteReader& r) {
  EstimatorConfig c;
  const auto kind = r.get<std::uint8_t>();
  if (kind > 6) throw snapshot_error("snapshot: unknown mechanism");
  c.mechanism = static_cast<MechanismKind>(kind);
  const auto fam = r.get<std::uint8_t>();
  if (fam > 2) throw snapshot_error("snapshot: unknown kernel family");
  c.kernel.family = static_cast<KernelFamily>(fam);
  for (auto* b : {&c.numerator, &c.denominator}) {
    b->c = r.get<double>();
    b->alpha = r.get<double>();
    b->p = r.get<std::int32_t>();
  }
  c.weights.beta = r.get<double>();
  c.boundary_reflection = r.get<std::uint8_t>() != 0;
  c.tau = r.get_doubles();
  c.causes = r.get<std::int32_t>();
  return c;
}

}  // namespace detail

inline std::uint64_t config_digest(const EstimatorConfig& c) {
  detail::ByteWriter w;
  detail::write_estimator_config(w, c);
  return detail::fnv1a64(w.bytes());
}

struct FitResult {
  MechanismKind mechanism = MechanismKind::right_censoring;
  std::uint64_t n = 0;
  /// Hazard of T; reverse-time hazard for left censoring; hazard of the
  /// susceptibles for the cure kinds.
  HazardSurface hazard;
  /// Survival of T (for cure kinds: latency survival of the susceptibles).
  SurvivalCurve survival;
  std::vector<double> cure_probability;  // cure kinds: 1 - phi(x)
  std::vector<double> exact_probability; // mcs: p(x)
  std::vector<CifEstimate> cif;          // competing risks: one per cause
  AssemblyDiagnostics diagnostics;
};

class MechanismEstimator {
 public:
  static constexpr std::string_view kMagic = "RCHBNDL";
  static constexpr std::uint32_t kFormatVersion = 1;

  MechanismEstimator(EvaluationLattice lattice, EstimatorConfig config)
      : lattice_(std::move(lattice)), config_(std::move(config)) {
    validate();
    build_states();
  }

  [[nodiscard]] const EvaluationLattice& lattice() const { return lattice_; }
  [[nodiscard]] const EstimatorConfig& config() const { return config_; }
  [[nodiscard]] std::uint64_t count() const { return states_.front().count(); }
  [[nodiscard]] std::span<const AccumulatorState> states() const { return states_; }

  /// Rejects records lacking the fields the mechanism needs; the bundle is
  /// untouched on error.
  void check(const Observation& obs) const {
    obs.validate();
    if (obs.x_c.size() != lattice_.d_c() || obs.x_d.size() != lattice_.d_d())
      throw data_error("observation: covariate dimensions do not match the lattice");
    const auto k = config_.mechanism;
    if (k == MechanismKind::modified_current_status) {
      if (obs.status < 0 || obs.status > 2) throw data_error("observation: status A must be 0, 1 or 2");
    } else if (obs.status != 0 && obs.status != 1) {
      throw data_error("observation: status delta must be 0 or 1");
    }
    if (is_truncated(k) && !obs.l) throw data_error("observation: truncation time l required");
    if (k == MechanismKind::ltrc_cure && !obs.c_obs) throw data_error("observation: censoring time c required");
    if (k == MechanismKind::competing_risks && obs.status == 1) {
      if (!obs.cause) throw data_error("observation: cause required on uncensored records");
      if (*obs.cause > config_.causes) throw data_error("observation: cause exceeds the configured number of causes");
    }
  }

  void update(const Observation& obs) {
    check(obs);
    for (std::size_t s = 0; s < states_.size(); ++s) {
      if (flipped_[s]) {
        Observation c = obs;
        c.status = 1 - obs.status;
        states_[s].update(c);
      } else {
        states_[s].update(obs);
      }
    }
  }

  [[nodiscard]] FitResult assemble() const {
    FitResult out;
    out.mechanism = config_.mechanism;
    out.n = count();
    const auto& st = states_;
    switch (config_.mechanism) {
      case MechanismKind::right_censoring:
        out.hazard = assemble_hazard_rc(st[0], st[1]);
        out.survival = survival_from_hazard(out.hazard);
        break;
      case MechanismKind::left_censoring: {
        out.hazard = assemble_reverse_hazard_lc(st[0], st[1]);
        const auto F = distribution_from_reverse_hazard(out.hazard);
        out.survival = SurvivalCurve{lattice_, std::vector<double>(F.size()), std::vector<double>(F.size()),
                                     "reverse_trapezoid"};
        for (std::size_t k = 0; k < F.size(); ++k) {
          out.survival.survival[k] = std::clamp(1.0 - F[k], 0.0, 1.0);
          out.survival.cumulative_hazard[k] = -std::log(std::max(out.survival.survival[k], 1e-300));
        }
        break;
      }
      case MechanismKind::cure_right_censoring: {
        const auto total = assemble_hazard_rc(st[0], st[1]);
        const auto tau = tau_per_point();
        out.cure_probability = cure_probability(total, tau);
        auto censor_hazard = assemble_hazard_rc(st[2], st[1]);
        const auto censor_surv = survival_from_hazard(censor_hazard);
        out.hazard = assemble_hazard_cure(st[0], st[1], censor_surv, st[3], out.cure_probability, tau);
        out.survival = survival_from_hazard(out.hazard);
        break;
      }
      case MechanismKind::ltrc:
        out.hazard = assemble_hazard_ltrc(st[0], st[1]);
        out.survival = survival_from_hazard(out.hazard);
        break;
      case MechanismKind::ltrc_cure: {
        const auto total = assemble_hazard_ltrc(st[0], st[1]);
        const auto tau = tau_per_point();
        out.cure_probability = cure_probability(total, tau);
        out.hazard = assemble_hazard_ltrc_cure(st[0], st[1], st[2], out.cure_probability, tau);
        out.survival = survival_from_hazard(out.hazard);
        break;
      }
      case MechanismKind::modified_current_status:
        out.exact_probability = mcs_exact_observation_probability(st[3], st[4]);
        out.hazard = assemble_hazard_mcs(st[0], st[1], st[2], out.exact_probability);
        out.survival = survival_from_hazard(out.hazard);
        break;
      case MechanismKind::competing_risks:
        out.hazard = assemble_hazard_rc(st[0], st[1]);
        out.hazard.mechanism = "competing_risks";
        out.survival = survival_from_hazard(out.hazard);
        for (int j = 1; j <= config_.causes; ++j)
          out.cif.push_back(assemble_cif(st[1 + static_cast<std::size_t>(j)], st[1], out.survival));
        break;
    }
    out.diagnostics = out.hazard.diagnostics;
    return out;
  }

  /// Magic, version, config digest, estimator config, per-state snapshots, FNV-1a trailer.
  [[nodiscard]] std::vector<std::uint8_t> snapshot() const {
    detail::ByteWriter w;
    w.put_raw(kMagic);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint64_t>(config_digest(config_));
    detail::write_estimator_config(w, config_);
    w.put<std::uint64_t>(states_.size());
    for (const auto& s : states_) w.put_bytes(s.snapshot());
    w.seal();
    return w.take();
  }

  static MechanismEstimator restore(std::span<const std::uint8_t> bytes) {
    auto r = detail::ByteReader::sealed(bytes);
    if (r.get_raw(kMagic.size()) != kMagic) throw snapshot_error("snapshot: bad magic");
    if (r.get<std::uint32_t>() != kFormatVersion) throw snapshot_error("snapshot: unsupported format version");
    const auto digest = r.get<std::uint64_t>();
    auto config = detail::read_estimator_config(r);
    if (config_digest(config) != digest) throw snapshot_error("snapshot: config digest mismatch");
    const auto ns = r.get<std::uint64_t>();
    if (ns == 0 || ns > 1024) throw snapshot_error("snapshot: implausible state count");
    std::vector<AccumulatorState> states;
    for (std::uint64_t k = 0; k < ns; ++k) states.push_back(AccumulatorState::restore(r.get_bytes()));
    if (!r.done()) throw snapshot_error("snapshot: trailing bytes");
    MechanismEstimator est = [&] {
      try {
        return MechanismEstimator(states.front().lattice(), std::move(config));
      } catch (const config_error& e) {
        throw snapshot_error(std::string("snapshot: invalid config: ") + e.what());
      }
    }();
    if (states.size() != est.states_.size()) throw snapshot_error("snapshot: state count mismatch");
    for (std::size_t k = 0; k < states.size(); ++k) {
      if (!(states[k].config() == est.states_[k].config()) || !(states[k].lattice() == est.lattice_))
        throw snapshot_error("snapshot: state layout does not match the mechanism");
      if (states[k].count() != states.front().count()) throw snapshot_error("snapshot: states disagree on n");
    }
    est.states_ = std::move(states);
    return est;
  }

 private:
  void validate() const {
    lattice_.validate();
    const int dc = static_cast<int>(lattice_.d_c());
    if (config_.numerator.p != dc + 1)
      throw config_error("estimator: numerator bandwidth needs p = d_c + 1 = " + std::to_string(dc + 1));
    if (config_.denominator.p != dc)
      throw config_error("estimator: denominator bandwidth needs p = d_c = " + std::to_string(dc));
    config_.numerator.validate();
    config_.denominator.validate();
    if (is_cure(config_.mechanism)) {
      if (config_.tau.size() != 1 && config_.tau.size() != lattice_.nx())
        throw config_error("estimator: cure mechanisms need tau (one value or one per covariate point)");
      for (double t : config_.tau)
        if (!(t > 0.0) || t > lattice_.t_grid.back()) throw config_error("estimator: tau outside the t grid");
    } else if (!config_.tau.empty()) {
      throw config_error("estimator: tau only applies to cure mechanisms");
    }
    if (config_.mechanism == MechanismKind::competing_risks && (config_.causes < 1 || config_.causes > 64))
      throw config_error("estimator: number of causes must lie in [1, 64]");
  }

  [[nodiscard]] std::vector<double> tau_per_point() const {
    if (config_.tau.size() == 1) return std::vector<double>(lattice_.nx(), config_.tau.front());
    return config_.tau;
  }

  void add(SelectorKind kind, std::vector<int> filter = {}, int cause = 0, bool flipped = false) {
    AccumulatorConfig c;
    c.kernel = config_.kernel;
    c.bandwidth = smooths_time(kind) ? config_.numerator : config_.denominator;
    c.weights = config_.weights;
    c.selector = {kind, cause, std::move(filter)};
    c.boundary_reflection = smooths_time(kind) && config_.boundary_reflection;
    states_.emplace_back(lattice_, std::move(c));
    flipped_.push_back(flipped);
  }

  void build_states() {
    using S = SelectorKind;
    switch (config_.mechanism) {
      case MechanismKind::right_censoring:
        add(S::uncensored_density);
        add(S::at_risk);
        break;
      case MechanismKind::left_censoring:
        add(S::uncensored_density);
        add(S::cdf);
        break;
      case MechanismKind::cure_right_censoring:
        add(S::uncensored_density);
        add(S::at_risk);
        add(S::uncensored_density, {}, 0, true);
        add(S::constant_one);
        break;
      case MechanismKind::ltrc:
        add(S::uncensored_density);
        add(S::risk_window);
        break;
      case MechanismKind::ltrc_cure:
        add(S::uncensored_density);
        add(S::risk_window);
        add(S::censor_window);
        break;
      case MechanismKind::modified_current_status:
        add(S::mcs_uncensored);
        add(S::at_risk, {1});
        add(S::at_risk, {0});
        add(S::constant_one, {1});
        add(S::constant_one, {1, 2});
        break;
      case MechanismKind::competing_risks:
        add(S::uncensored_density);
        add(S::at_risk);
        for (int j = 1; j <= config_.causes; ++j) add(S::cause_density, {}, j);
        break;
    }
  }

  EvaluationLattice lattice_;
  EstimatorConfig config_;
  std::vector<AccumulatorState> states_;
  std::vector<bool> flipped_;
};

}  // namespace hazardstream
