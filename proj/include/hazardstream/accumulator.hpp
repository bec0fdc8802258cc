#pragma once

// One-pass weighted recursive kernel estimator
//
//   g_n(t, x) = sum_i omega(n, i) * D_i(t) * K_{h(i)}(Z_i - z) * 1{X_{d,i} = x_d},
//
// materialised on a fixed EvaluationLattice. Z is (Y, X_c) for the
// density-type selectors and X_c otherwise. Each update is O(lattice size)
// and the memory footprint does not depend on the number of observations.
//
// A state is not mergeable with another partially built state: the
// bandwidth depends on the global index i of each observation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hazardstream/binary_io.hpp"
#include "hazardstream/data.hpp"
#include "hazardstream/errors.hpp"
#include "hazardstream/kernel.hpp"

namespace hazardstream {

/// Which indicator D_i(t) multiplies the kernel term.
enum class SelectorKind : std::uint8_t {
  uncensored_density = 0,  // delta * L_b(Y - t)
  at_risk = 1,             // 1{Y >= t}
  cdf = 2,                 // 1{Y <= t}
  risk_window = 3,         // 1{L <= t <= Y}
  censor_window = 4,       // 1{L <= t <= C}
  mcs_uncensored = 5,      // A(2 - A) * L_b(Y - t)
  cause_density = 6,       // 1{cause = j} * delta * L_b(Y - t)
  constant_one = 7,        // 1, density of X only
};

inline std::string_view to_string(SelectorKind k) {
  switch (k) {
    case SelectorKind::uncensored_density: return "uncensored_density";
    case SelectorKind::at_risk: return "at_risk";
    case SelectorKind::cdf: return "cdf";
    case SelectorKind::risk_window: return "risk_window";
    case SelectorKind::censor_window: return "censor_window";
    case SelectorKind::mcs_uncensored: return "mcs_uncensored";
    case SelectorKind::cause_density: return "cause_density";
    case SelectorKind::constant_one: return "constant_one";
  }
  return "unknown";
}

/// True when t is part of the smoothing vector (p = d_c + 1).
constexpr bool smooths_time(SelectorKind k) {
  return k == SelectorKind::uncensored_density || k == SelectorKind::mcs_uncensored ||
         k == SelectorKind::cause_density;
}

struct DSelector {
  SelectorKind kind = SelectorKind::at_risk;
  int cause = 0;  // event type j for cause_density
  /// Records whose status is outside this list contribute a zero term
  /// (the index i still advances). Empty means no restriction.
  std::vector<int> status_filter;

  friend bool operator==(const DSelector&, const DSelector&) = default;
};

struct AccumulatorConfig {
  KernelSpec kernel;
  BandwidthSchedule bandwidth;
  WeightScheme weights;
  DSelector selector;
  bool boundary_reflection = false;

  friend bool operator==(const AccumulatorConfig&, const AccumulatorConfig&) = default;
};

namespace detail {

inline void write_config(ByteWriter& w, const AccumulatorConfig& c) {
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.kernel.family));
  w.put<double>(c.bandwidth.c);
  w.put<double>(c.bandwidth.alpha);
  w.put<std::int32_t>(c.bandwidth.p);
  w.put<double>(c.weights.beta);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.selector.kind));
  w.put<std::int32_t>(c.selector.cause);
  w.put<std::uint64_t>(c.selector.status_filter.size());
  for (int s : c.selector.status_filter) w.put<std::int32_t>(s);
  w.put<std::uint8_t>(c.boundary_reflection ? 1 : 0);
}

inline AccumulatorConfig read_config(ByteReader& r) {
  AccumulatorConfig c;
  const auto fam = r.get<std::uint8_t>();
  if (fam > 2) throw snapshot_error("snapshot: unknown kernel family");
  c.kernel.family = static_cast<KernelFamily>(fam);
  c.bandwidth.c = r.get<double>();
  c.bandwidth.alpha = r.get<double>();
  c.bandwidth.p = r.get<std::int32_t>();
  c.weights.beta = r.get<double>();
  const auto kind = r.get<std::uint8_t>();
  if (kind > 7) throw snapshot_error("snapshot: unknown selector kind");
  c.selector.kind = static_cast<SelectorKind>(kind);
  c.selector.cause = r.get<std::int32_t>();
  const auto nf = r.get<std::uint64_t>();
  if (nf > 64) throw snapshot_error("snapshot: implausible status filter");
  for (std::uint64_t k = 0; k < nf; ++k) c.selector.status_filter.push_back(r.get<std::int32_t>());
  c.boundary_reflection = r.get<std::uint8_t>() != 0;
  return c;
}

inline void write_lattice(ByteWriter& w, const EvaluationLattice& lat) {
  w.put_doubles(lat.t_grid);
  w.put<std::uint64_t>(lat.nx());
  w.put<std::uint64_t>(lat.d_c());
  w.put<std::uint64_t>(lat.d_d());
  for (const auto& p : lat.x_points) {
    for (double v : p.x_c) w.put<double>(v);
    for (int v : p.x_d) w.put<std::int32_t>(v);
  }
  w.put<std::uint64_t>(lat.standardization.center_scale.size());
  for (const auto& [m, s] : lat.standardization.center_scale) {
    w.put<double>(m);
    w.put<double>(s);
  }
  w.put<double>(lat.standardization.time_scale);
}

inline EvaluationLattice read_lattice(ByteReader& r) {
  EvaluationLattice lat;
  lat.t_grid = r.get_doubles();
  const auto nx = r.get<std::uint64_t>();
  const auto dc = r.get<std::uint64_t>();
  const auto dd = r.get<std::uint64_t>();
  if (nx > (1u << 24) || dc > 1024 || dd > 1024) throw snapshot_error("snapshot: implausible lattice");
  lat.x_points.resize(nx);
  for (auto& p : lat.x_points) {
    p.x_c.resize(dc);
    p.x_d.resize(dd);
    for (auto& v : p.x_c) v = r.get<double>();
    for (auto& v : p.x_d) v = r.get<std::int32_t>();
  }
  const auto ns = r.get<std::uint64_t>();
  if (ns > 1024) throw snapshot_error("snapshot: implausible standardization");
  for (std::uint64_t k = 0; k < ns; ++k) {
    const double m = r.get<double>();
    const double s = r.get<double>();
    lat.standardization.center_scale.emplace_back(m, s);
  }
  lat.standardization.time_scale = r.get<double>();
  try {
    lat.validate();
  } catch (const config_error& e) {
    throw snapshot_error(std::string("snapshot: invalid lattice: ") + e.what());
  }
  return lat;
}

}  // namespace detail

/// Stable digest of an accumulator configuration.
inline std::uint64_t config_digest(const AccumulatorConfig& c) {
  detail::ByteWriter w;
  detail::write_config(w, c);
  return detail::fnv1a64(w.bytes());
}

class AccumulatorState {
 public:
  static constexpr std::string_view kMagic = "RCHSNAP";
  static constexpr std::uint32_t kFormatVersion = 1;

  AccumulatorState(EvaluationLattice lattice, AccumulatorConfig config)
      : lattice_(std::move(lattice)), config_(std::move(config)) {
    lattice_.validate();
    if (lattice_.d_c() < 1) throw config_error("accumulator: at least one continuous covariate is required");
    config_.bandwidth.validate();
    const int expected_p = static_cast<int>(lattice_.d_c()) + (smooths_time(config_.selector.kind) ? 1 : 0);
    if (config_.bandwidth.p != expected_p)
      throw config_error("accumulator: bandwidth dimension p=" + std::to_string(config_.bandwidth.p) +
                         " does not match selector " + std::string(to_string(config_.selector.kind)) +
                         " (expected " + std::to_string(expected_p) + ")");
    if (config_.selector.kind == SelectorKind::cause_density && config_.selector.cause < 1)
      throw config_error("accumulator: cause_density needs a cause index >= 1");
    values_.assign(lattice_.size(), 0.0);
    t_scratch_.resize(lattice_.nt());
    x_scratch_.resize(lattice_.nx());
    z_scratch_.resize(lattice_.d_c());
    for (const auto& p : lattice_.x_points)
      for (std::size_t j = 0; j < lattice_.d_c(); ++j)
        x_std_.push_back(lattice_.standardization.apply(j, p.x_c[j]));
  }

  [[nodiscard]] const EvaluationLattice& lattice() const { return lattice_; }
  [[nodiscard]] const AccumulatorConfig& config() const { return config_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::uint64_t count() const { return count_; }
  [[nodiscard]] double omega_mass() const { return omega_mass_; }

  [[nodiscard]] double at(std::size_t t_idx, std::size_t x_idx) const {
    return values_[lattice_.index(t_idx, x_idx)];
  }

  /// Weight attached to the record's indicator before the time factor, e.g.
  /// delta for uncensored_density or A(2-A) for mcs_uncensored.
  [[nodiscard]] double status_weight(const Observation& obs) const {
    const auto& sel = config_.selector;
    if (!sel.status_filter.empty() &&
        std::find(sel.status_filter.begin(), sel.status_filter.end(), obs.status) == sel.status_filter.end())
      return 0.0;
    switch (sel.kind) {
      case SelectorKind::uncensored_density: return obs.status == 1 ? 1.0 : 0.0;
      case SelectorKind::mcs_uncensored: return static_cast<double>(obs.status * (2 - obs.status));
      case SelectorKind::cause_density: return (obs.status == 1 && obs.cause && *obs.cause == sel.cause) ? 1.0 : 0.0;
      default: return 1.0;
    }
  }

  /// Folds one observation into the state. On error the state is unchanged.
  void update(const Observation& obs) {
    check(obs);
    const std::uint64_t i = count_ + 1;
    const double h = config_.bandwidth.at(i);
    const double w_raw = config_.weights.raw(i);
    const double new_mass = omega_mass_ + w_raw;
    const double a = w_raw / new_mass;
    const double shrink = omega_mass_ / new_mass;

    const double sw = status_weight(obs);
    fill_time_factor(obs, h);
    fill_covariate_factor(obs, h);

    const std::size_t nt = lattice_.nt();
    for (std::size_t x = 0; x < lattice_.nx(); ++x) {
      double* row = values_.data() + x * nt;
      const double kx = x_scratch_[x] * sw;
      if (kx == 0.0) {
        for (std::size_t t = 0; t < nt; ++t) row[t] = shrink * row[t];
      } else {
        for (std::size_t t = 0; t < nt; ++t) row[t] = a * (t_scratch_[t] * kx) + shrink * row[t];
      }
    }
    count_ = i;
    omega_mass_ = new_mass;
  }

  /// Value at a lattice covariate point, linearly interpolated in t between
  /// grid values.
  [[nodiscard]] double evaluate(double t, const CovariatePoint& x) const {
    const auto xi = lattice_.find_x(x);
    if (!xi) throw data_error("evaluate: covariate point is not on the lattice");
    const auto& g = lattice_.t_grid;
    if (!(t >= g.front() && t <= g.back())) throw data_error("evaluate: t outside the lattice time range");
    auto it = std::lower_bound(g.begin(), g.end(), t);
    const auto k = static_cast<std::size_t>(it - g.begin());
    if (*it == t) return at(k, *xi);
    const double w = (t - g[k - 1]) / (g[k] - g[k - 1]);
    return (1.0 - w) * at(k - 1, *xi) + w * at(k, *xi);
  }

  /// State with given values, e.g. produced by another implementation.
  static AccumulatorState from_values(EvaluationLattice lattice, AccumulatorConfig config, std::vector<double> values,
                                      std::uint64_t count, double omega_mass) {
    AccumulatorState s(std::move(lattice), std::move(config));
    if (values.size() != s.values_.size()) throw config_error("accumulator: value count does not match the lattice");
    for (double v : values)
      if (!std::isfinite(v)) throw config_error("accumulator: values must be finite");
    s.values_ = std::move(values);
    s.count_ = count;
    s.omega_mass_ = omega_mass;
    return s;
  }

  /// Magic, format version, config digest, config, i, omega mass, lattice,
  /// x-major values, FNV-1a trailer.
  [[nodiscard]] std::vector<std::uint8_t> snapshot() const {
    detail::ByteWriter w;
    w.put_raw(kMagic);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint64_t>(config_digest(config_));
    detail::write_config(w, config_);
    w.put<std::uint64_t>(count_);
    w.put<double>(omega_mass_);
    detail::write_lattice(w, lattice_);
    w.put_doubles(values_);
    w.seal();
    return w.take();
  }

  static AccumulatorState restore(std::span<const std::uint8_t> bytes) {
    auto r = detail::ByteReader::sealed(bytes);
    if (r.get_raw(kMagic.size()) != kMagic) throw snapshot_error("snapshot: bad magic");
    if (r.get<std::uint32_t>() != kFormatVersion) throw snapshot_error("snapshot: unsupported format version");
    const auto digest = r.get<std::uint64_t>();
    auto config = detail::read_config(r);
    if (config_digest(config) != digest) throw snapshot_error("snapshot: config digest mismatch");
    const auto count = r.get<std::uint64_t>();
    const double mass = r.get<double>();
    auto lattice = detail::read_lattice(r);
    auto values = r.get_doubles();
    if (!r.done()) throw snapshot_error("snapshot: trailing bytes");
    AccumulatorState s = [&] {
      try {
        return AccumulatorState(std::move(lattice), std::move(config));
      } catch (const config_error& e) {
        throw snapshot_error(std::string("snapshot: invalid config: ") + e.what());
      }
    }();
    if (values.size() != s.values_.size()) throw snapshot_error("snapshot: value count mismatch");
    s.values_ = std::move(values);
    s.count_ = count;
    s.omega_mass_ = mass;
    return s;
  }

 private:
  void check(const Observation& obs) const {
    obs.validate();
    if (obs.x_c.size() != lattice_.d_c() || obs.x_d.size() != lattice_.d_d())
      throw data_error("observation: covariate dimensions do not match the lattice");
    const auto k = config_.selector.kind;
    if ((k == SelectorKind::risk_window || k == SelectorKind::censor_window) && !obs.l)
      throw data_error("observation: truncation time l required by " + std::string(to_string(k)));
    if (k == SelectorKind::censor_window && !obs.c_obs)
      throw data_error("observation: censoring time c required by censor_window");
  }

  void fill_time_factor(const Observation& obs, double h) {
    const auto& g = lattice_.t_grid;
    const std::size_t nt = g.size();
    switch (config_.selector.kind) {
      case SelectorKind::uncensored_density:
      case SelectorKind::mcs_uncensored:
      case SelectorKind::cause_density: {
        const double b = h * lattice_.standardization.time_scale;
        for (std::size_t k = 0; k < nt; ++k) {
          double v = kernel_eval(config_.kernel, (obs.y - g[k]) / b) / b;
          if (config_.boundary_reflection) v -= kernel_eval(config_.kernel, (obs.y + g[k]) / b) / b;
          t_scratch_[k] = v;
        }
        break;
      }
      case SelectorKind::at_risk:
        for (std::size_t k = 0; k < nt; ++k) t_scratch_[k] = obs.y >= g[k] ? 1.0 : 0.0;
        break;
      case SelectorKind::cdf:
        for (std::size_t k = 0; k < nt; ++k) t_scratch_[k] = obs.y <= g[k] ? 1.0 : 0.0;
        break;
      case SelectorKind::risk_window:
        for (std::size_t k = 0; k < nt; ++k) t_scratch_[k] = (*obs.l <= g[k] && g[k] <= obs.y) ? 1.0 : 0.0;
        break;
      case SelectorKind::censor_window:
        for (std::size_t k = 0; k < nt; ++k) t_scratch_[k] = (*obs.l <= g[k] && g[k] <= *obs.c_obs) ? 1.0 : 0.0;
        break;
      case SelectorKind::constant_one:
        std::fill(t_scratch_.begin(), t_scratch_.end(), 1.0);
        break;
    }
  }

  void fill_covariate_factor(const Observation& obs, double h) {
    const auto& st = lattice_.standardization;
    const std::size_t dc = lattice_.d_c();
    for (std::size_t j = 0; j < dc; ++j) z_scratch_[j] = st.apply(j, obs.x_c[j]);
    for (std::size_t x = 0; x < lattice_.nx(); ++x) {
      if (lattice_.x_points[x].x_d != obs.x_d) {
        x_scratch_[x] = 0.0;
        continue;
      }
      const double* zx = x_std_.data() + x * dc;
      double k = 1.0;
      for (std::size_t j = 0; j < dc && k != 0.0; ++j)
        k *= kernel_eval(config_.kernel, (z_scratch_[j] - zx[j]) / h) / h;
      x_scratch_[x] = k;
    }
  }

  EvaluationLattice lattice_;
  AccumulatorConfig config_;
  std::vector<double> values_;
  std::uint64_t count_ = 0;
  double omega_mass_ = 0.0;
  std::vector<double> t_scratch_;
  std::vector<double> x_scratch_;
  std::vector<double> z_scratch_;
  std::vector<double> x_std_;  // standardized lattice covariates, x-major
};

}  // namespace hazardstream
