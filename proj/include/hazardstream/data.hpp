#pragma once

// Streamed observations and the fixed evaluation lattice on which every
// function-valued estimate is stored.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hazardstream/errors.hpp"

namespace hazardstream {

/// One streamed record.
///
/// `status` is the censoring indicator delta in {0,1} for censoring models,
/// or A in {0,1,2} for the modified current status scheme.
struct Observation {
  double y = 0.0;
  int status = 0;
  std::vector<double> x_c;
  std::vector<int> x_d;
  std::optional<double> l;      // truncation time (LTRC)
  std::optional<double> c_obs;  // observed censoring time (LTRC with cure)
  std::optional<int> cause;     // event type (competing risks)

  /// Throws data_error on non-finite fields or l > y.
  void validate() const {
    if (!std::isfinite(y) || y < 0.0) throw data_error("observation: y must be finite and >= 0");
    for (double v : x_c)
      if (!std::isfinite(v)) throw data_error("observation: non-finite continuous covariate");
    if (l) {
      if (!std::isfinite(*l) || *l < 0.0) throw data_error("observation: l must be finite and >= 0");
      if (*l > y) throw data_error("observation: truncation time exceeds duration");
    }
    if (c_obs && (!std::isfinite(*c_obs) || *c_obs < 0.0))
      throw data_error("observation: c must be finite and >= 0");
    if (cause && *cause < 1) throw data_error("observation: cause must be a positive integer");
  }
};

struct CovariatePoint {
  std::vector<double> x_c;
  std::vector<int> x_d;

  friend bool operator==(const CovariatePoint&, const CovariatePoint&) = default;
};

/// Fixed affine rescaling of continuous covariates, (v - center) / scale.
///
/// `time_scale` rescales durations in the time kernel: smoothing in t uses
/// bandwidth h * time_scale in original time units, which is the same as
/// smoothing Y / time_scale with bandwidth h and mapping back.
struct Standardization {
  std::vector<std::pair<double, double>> center_scale;
  double time_scale = 1.0;

  [[nodiscard]] bool empty() const { return center_scale.empty(); }

  void validate(std::size_t d_c) const {
    if (!center_scale.empty() && center_scale.size() != d_c)
      throw config_error("standardization: expected " + std::to_string(d_c) + " (center, scale) pairs");
    for (const auto& [m, s] : center_scale) {
      if (!std::isfinite(m)) throw config_error("standardization: center must be finite");
      if (!(s > 0.0) || !std::isfinite(s)) throw config_error("standardization: scales must be positive");
    }
    if (!(time_scale > 0.0) || !std::isfinite(time_scale))
      throw config_error("standardization: time scale must be positive");
  }

  [[nodiscard]] double apply(std::size_t j, double v) const {
    if (center_scale.empty()) return v;
    return (v - center_scale[j].first) / center_scale[j].second;
  }

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct EvaluationLattice {
  std::vector<double> t_grid;  // strictly increasing, >= 0
  std::vector<CovariatePoint> x_points;
  Standardization standardization;

  EvaluationLattice() = default;
  EvaluationLattice(std::vector<double> t, std::vector<CovariatePoint> x, Standardization s = {})
      : t_grid(std::move(t)), x_points(std::move(x)), standardization(std::move(s)) {
    validate();
  }

  void validate() const {
    if (t_grid.empty()) throw config_error("lattice: empty t grid");
    if (x_points.empty()) throw config_error("lattice: no covariate points");
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      if (!std::isfinite(t_grid[k]) || t_grid[k] < 0.0)
        throw config_error("lattice: t grid values must be nonnegative and finite");
      if (k > 0 && !(t_grid[k] > t_grid[k - 1])) throw config_error("lattice: t grid must be strictly increasing");
    }
    const auto dc = x_points.front().x_c.size();
    const auto dd = x_points.front().x_d.size();
    for (const auto& p : x_points) {
      if (p.x_c.size() != dc || p.x_d.size() != dd)
        throw config_error("lattice: covariate points have inconsistent dimensions");
      for (double v : p.x_c)
        if (!std::isfinite(v)) throw config_error("lattice: non-finite covariate point");
    }
    standardization.validate(dc);
  }

  [[nodiscard]] std::size_t nt() const { return t_grid.size(); }
  [[nodiscard]] std::size_t nx() const { return x_points.size(); }
  [[nodiscard]] std::size_t size() const { return nt() * nx(); }
  [[nodiscard]] std::size_t d_c() const { return x_points.front().x_c.size(); }
  [[nodiscard]] std::size_t d_d() const { return x_points.front().x_d.size(); }

  /// Values are laid out x-major: each covariate point owns a contiguous t curve.
  [[nodiscard]] std::size_t index(std::size_t t_idx, std::size_t x_idx) const { return x_idx * nt() + t_idx; }

  [[nodiscard]] std::optional<std::size_t> find_x(const CovariatePoint& p) const {
    auto it = std::find(x_points.begin(), x_points.end(), p);
    if (it == x_points.end()) return std::nullopt;
    return static_cast<std::size_t>(it - x_points.begin());
  }

  friend bool operator==(const EvaluationLattice&, const EvaluationLattice&) = default;
};

/// Equidistant grid of `count` points on [lo, hi].
inline std::vector<double> equidistant_grid(double lo, double hi, std::size_t count) {
  if (count == 0) throw config_error("grid: count must be >= 1");
  if (count == 1) return {lo};
  if (!(hi > lo)) throw config_error("grid: max must exceed min");
  std::vector<double> g(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) g[k] = lo + step * static_cast<double>(k);
  g.back() = hi;
  return g;
}

/// Cartesian product of per-coordinate continuous values and a list of
/// discrete combinations; continuous coordinates vary fastest.
inline std::vector<CovariatePoint> covariate_grid(const std::vector<std::vector<double>>& continuous_values,
                                                  const std::vector<std::vector<int>>& discrete_support) {
  std::vector<std::vector<double>> cont{{}};
  for (const auto& vals : continuous_values) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : cont)
      for (double v : vals) {
        auto p = prefix;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    cont = std::move(next);
  }
  const std::vector<std::vector<int>> disc = discrete_support.empty() ? std::vector<std::vector<int>>{{}} : discrete_support;
  std::vector<CovariatePoint> out;
  for (const auto& d : disc)
    for (const auto& c : cont) out.push_back({c, d});
  return out;
}

}  // namespace hazardstream
