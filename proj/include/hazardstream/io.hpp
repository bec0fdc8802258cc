#pragma once

// Text formats: dataset CSV / JSONL streams, JSON sidecars, lattice and
// standardization files, and the surface CSV export.

#include <charconv>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazardstream/binary_io.hpp"
#include "hazardstream/data.hpp"
#include "hazardstream/errors.hpp"
#include "hazardstream/estimator.hpp"
#include "hazardstream/hazard.hpp"
#include "hazardstream/simulator.hpp"

namespace hazardstream {

using json = nlohmann::json;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view s) {
  const auto d = parse_double(s);
  if (!d || !std::isfinite(*d) || std::floor(*d) != *d || std::abs(*d) > 1e9) return std::nullopt;
  return static_cast<int>(*d);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Column names of a dataset. The status column is `delta` for every
/// mechanism (it holds A for modified current status).
struct DataSchema {
  std::vector<std::string> continuous{"x1", "x2"};
  std::vector<std::string> discrete{"d1", "d2", "d3"};

  friend bool operator==(const DataSchema&, const DataSchema&) = default;
};

struct DatasetColumns {
  bool l = false;
  bool c = false;
  bool cause = false;
};

inline DatasetColumns columns_for(MechanismKind kind) {
  return {is_truncated(kind), kind == MechanismKind::ltrc_cure, kind == MechanismKind::competing_risks};
}

inline std::string dataset_header(const DataSchema& schema, DatasetColumns cols) {
  std::string h = "y,delta";
  for (const auto& n : schema.continuous) h += "," + n;
  for (const auto& n : schema.discrete) h += "," + n;
  if (cols.l) h += ",l";
  if (cols.c) h += ",c";
  if (cols.cause) h += ",cause";
  return h;
}

inline void write_dataset_row(std::ostream& os, const Observation& o, DatasetColumns cols) {
  os << format_double(o.y) << ',' << o.status;
  for (double v : o.x_c) os << ',' << format_double(v);
  for (int v : o.x_d) os << ',' << v;
  if (cols.l) os << ',' << (o.l ? format_double(*o.l) : std::string());
  if (cols.c) os << ',' << (o.c_obs ? format_double(*o.c_obs) : std::string());
  if (cols.cause) os << ',' << (o.cause ? std::to_string(*o.cause) : std::string());
  os << '\n';
}

struct MalformedRow {
  std::uint64_t line;
  std::string reason;
};

/// Row-at-a-time reader for CSV (with header) or JSONL datasets. Rows that
/// fail to parse are skipped and recorded; schema problems (missing required
/// columns) throw data_error immediately.
class ObservationReader {
 public:
  enum class Format { csv, jsonl };

  ObservationReader(std::istream& in, Format format, DataSchema schema, DatasetColumns required)
      : in_(in), format_(format), schema_(std::move(schema)), required_(required) {
    if (format_ == Format::csv) read_header();
  }

  static Format format_for_path(std::string_view path) {
    return path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl" ? Format::jsonl : Format::csv;
  }

  /// Next well-formed row; false at end of input.
  bool next(Observation& obs) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      ++rows_;
      std::string reason;
      const bool ok = format_ == Format::csv ? parse_csv(line, obs, reason) : parse_jsonl(line, obs, reason);
      if (ok) {
        try {
          obs.validate();
          return true;
        } catch (const data_error& e) {
          reason = e.what();
        }
      }
      malformed_.push_back({line_no_, reason});
    }
    return false;
  }

  [[nodiscard]] std::uint64_t rows() const { return rows_; }
  [[nodiscard]] const std::vector<MalformedRow>& malformed() const { return malformed_; }
  [[nodiscard]] double malformed_fraction() const {
    return rows_ == 0 ? 0.0 : static_cast<double>(malformed_.size()) / static_cast<double>(rows_);
  }

  /// Records rejected later (e.g. by the estimator's mechanism checks).
  void reject(std::string reason) { malformed_.push_back({line_no_, std::move(reason)}); }

 private:
  void read_header() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) break;
      line.clear();
    }
    if (line.empty()) {
      empty_ = true;
      return;
    }
    const auto cols = split(line, ',');
    std::map<std::string, std::size_t> pos;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      std::string name(cols[k]);
      while (!name.empty() && name.back() == ' ') name.pop_back();
      while (!name.empty() && name.front() == ' ') name.erase(name.begin());
      pos[name] = k;
    }
    auto need = [&](const std::string& name) {
      auto it = pos.find(name);
      if (it == pos.end()) throw data_error("schema: missing column '" + name + "'");
      return it->second;
    };
    auto maybe = [&](const std::string& name) -> std::optional<std::size_t> {
      auto it = pos.find(name);
      if (it == pos.end()) return std::nullopt;
      return it->second;
    };
    idx_y_ = need("y");
    idx_status_ = need("delta");
    for (const auto& n : schema_.continuous) idx_c_.push_back(need(n));
    for (const auto& n : schema_.discrete) idx_d_.push_back(need(n));
    idx_l_ = required_.l ? std::optional(need("l")) : maybe("l");
    idx_cobs_ = required_.c ? std::optional(need("c")) : maybe("c");
    idx_cause_ = required_.cause ? std::optional(need("cause")) : maybe("cause");
    ncols_ = cols.size();
  }

  bool parse_csv(const std::string& line, Observation& obs, std::string& reason) const {
    if (empty_) {
      reason = "no header";
      return false;
    }
    const auto f = split(line, ',');
    if (f.size() != ncols_) {
      reason = "expected " + std::to_string(ncols_) + " fields, got " + std::to_string(f.size());
      return false;
    }
    auto num = [&](std::size_t k, const char* what, double& out) {
      const auto v = parse_double(f[k]);
      if (!v) {
        reason = std::string("unparseable ") + what;
        return false;
      }
      out = *v;
      return true;
    };
    auto integer = [&](std::size_t k, const char* what, int& out) {
      const auto v = parse_int(f[k]);
      if (!v) {
        reason = std::string("unparseable ") + what;
        return false;
      }
      out = *v;
      return true;
    };
    obs = Observation{};
    if (!num(idx_y_, "y", obs.y) || !integer(idx_status_, "delta", obs.status)) return false;
    obs.x_c.resize(idx_c_.size());
    obs.x_d.resize(idx_d_.size());
    for (std::size_t j = 0; j < idx_c_.size(); ++j)
      if (!num(idx_c_[j], "continuous covariate", obs.x_c[j])) return false;
    for (std::size_t j = 0; j < idx_d_.size(); ++j)
      if (!integer(idx_d_[j], "discrete covariate", obs.x_d[j])) return false;
    auto optional_num = [&](std::optional<std::size_t> idx, bool required, const char* what,
                            std::optional<double>& out) {
      if (!idx) return true;
      const auto s = f[*idx];
      if (s.find_first_not_of(" \t") == std::string_view::npos) {
        if (required) reason = std::string("missing ") + what;
        return !required;
      }
      double v;
      if (!num(*idx, what, v)) return false;
      out = v;
      return true;
    };
    if (!optional_num(idx_l_, required_.l, "l", obs.l)) return false;
    if (!optional_num(idx_cobs_, required_.c, "c", obs.c_obs)) return false;
    if (idx_cause_) {
      const auto s = f[*idx_cause_];
      if (s.find_first_not_of(" \t") != std::string_view::npos) {
        int v;
        if (!integer(*idx_cause_, "cause", v)) return false;
        obs.cause = v;
      }
    }
    return true;
  }

  bool parse_jsonl(const std::string& line, Observation& obs, std::string& reason) const {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      reason = "invalid JSON";
      return false;
    }
    if (!j.is_object()) {
      reason = "not a JSON object";
      return false;
    }
    auto get_num = [&](const std::string& key, double& out) {
      if (!j.contains(key)) throw data_error("schema: missing field '" + key + "'");
      if (!j[key].is_number()) {
        reason = "non-numeric " + key;
        return false;
      }
      out = j[key].get<double>();
      return true;
    };
    auto get_int = [&](const std::string& key, int& out) {
      double v;
      if (!get_num(key, v)) return false;
      if (std::floor(v) != v) {
        reason = "non-integer " + key;
        return false;
      }
      out = static_cast<int>(v);
      return true;
    };
    obs = Observation{};
    if (!get_num("y", obs.y) || !get_int("delta", obs.status)) return false;
    for (const auto& n : schema_.continuous) {
      double v;
      if (!get_num(n, v)) return false;
      obs.x_c.push_back(v);
    }
    for (const auto& n : schema_.discrete) {
      int v;
      if (!get_int(n, v)) return false;
      obs.x_d.push_back(v);
    }
    auto opt = [&](const char* key, bool required, std::optional<double>& out) {
      if (!j.contains(key) || j[key].is_null()) {
        if (required) reason = std::string("missing ") + key;
        return !required;
      }
      double v;
      if (!get_num(key, v)) return false;
      out = v;
      return true;
    };
    if (!opt("l", required_.l, obs.l) || !opt("c", required_.c, obs.c_obs)) return false;
    if (j.contains("cause") && !j["cause"].is_null()) {
      int v;
      if (!get_int("cause", v)) return false;
      obs.cause = v;
    }
    return true;
  }

  std::istream& in_;
  Format format_;
  DataSchema schema_;
  DatasetColumns required_;
  bool empty_ = false;
  std::size_t ncols_ = 0;
  std::size_t idx_y_ = 0, idx_status_ = 0;
  std::vector<std::size_t> idx_c_, idx_d_;
  std::optional<std::size_t> idx_l_, idx_cobs_, idx_cause_;
  std::uint64_t line_no_ = 0;
  std::uint64_t rows_ = 0;
  std::vector<MalformedRow> malformed_;
};

// ---------------------------------------------------------------------------
// JSON documents

inline json to_json(const SimModel& m) {
  const auto& cv = m.covariates;
  return json{{"family", std::string(to_string(m.family))},
              {"beta", m.beta},
              {"alpha_base", m.alpha_base},
              {"x1_mixture",
               {{"pi", cv.x1.pi}, {"a1", cv.x1.a1}, {"b1", cv.x1.b1}, {"a2", cv.x1.a2}, {"b2", cv.x1.b2}}},
              {"x1_transform", {{"scale", cv.x1.scale}, {"offset", cv.x1.offset}}},
              {"x2_gamma", {{"shape", cv.gamma_shape}, {"rate", cv.gamma_rate}}},
              {"tumour_probs", cv.tumour_probs},
              {"relapse_prob", cv.relapse_prob},
              {"censoring", {{"rate", m.censoring.rate}, {"shift", m.censoring.shift}}},
              {"target_censor_fraction", m.target_censor_fraction},
              {"t_max", m.t_max},
              {"seed", m.seed}};
}

inline json to_json(const Standardization& s, const DataSchema& schema) {
  json cols = json::array();
  for (std::size_t j = 0; j < s.center_scale.size(); ++j)
    cols.push_back({{"name", j < schema.continuous.size() ? schema.continuous[j] : "x" + std::to_string(j + 1)},
                    {"mean", s.center_scale[j].first},
                    {"sd", s.center_scale[j].second}});
  return json{{"columns", cols}, {"time_scale", s.time_scale}};
}

/// Reads {"columns": [{"name", "mean", "sd"}...], "time_scale"?}; columns are
/// matched to the schema by name.
inline Standardization standardization_from_json(const json& j, const DataSchema& schema) {
  if (!j.contains("columns") || !j["columns"].is_array()) throw config_error("standardization: missing 'columns'");
  std::map<std::string, std::pair<double, double>> by_name;
  for (const auto& c : j["columns"]) {
    if (!c.contains("name") || !c.contains("mean") || !c.contains("sd"))
      throw config_error("standardization: each column needs name, mean and sd");
    by_name[c["name"].get<std::string>()] = {c["mean"].get<double>(), c["sd"].get<double>()};
  }
  Standardization s;
  for (const auto& n : schema.continuous) {
    auto it = by_name.find(n);
    if (it == by_name.end()) throw config_error("standardization: no entry for column '" + n + "'");
    s.center_scale.push_back(it->second);
  }
  s.time_scale = j.value("time_scale", 1.0);
  s.validate(schema.continuous.size());
  return s;
}

inline json to_json(const std::vector<CovariatePoint>& points) {
  json arr = json::array();
  for (const auto& p : points) arr.push_back({{"x_c", p.x_c}, {"x_d", p.x_d}});
  return arr;
}

/// Accepts either a bare array of {"x_c", "x_d"} objects or a document with a "points" array.
inline std::vector<CovariatePoint> points_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("points") ? j["points"] : j;
  if (!arr.is_array() || arr.empty()) throw config_error("x-points: expected a non-empty array");
  std::vector<CovariatePoint> out;
  for (const auto& p : arr) {
    if (!p.contains("x_c")) throw config_error("x-points: each point needs x_c");
    CovariatePoint cp;
    cp.x_c = p["x_c"].get<std::vector<double>>();
    if (p.contains("x_d")) cp.x_d = p["x_d"].get<std::vector<int>>();
    out.push_back(std::move(cp));
  }
  return out;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error("'" + path + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Surface export

/// Stable label of a covariate point: "x" + 8 hex digits of FNV-1a over its values.
inline std::string point_digest(const CovariatePoint& p) {
  detail::ByteWriter w;
  for (double v : p.x_c) w.put<double>(v);
  for (int v : p.x_d) w.put<std::int32_t>(v);
  const auto h = detail::fnv1a64(w.bytes());
  char buf[20];
  std::snprintf(buf, sizeof buf, "x%08llx", static_cast<unsigned long long>(h & 0xffffffffULL));
  return buf;
}

inline std::string describe_point(const CovariatePoint& p) {
  std::string s;
  for (std::size_t j = 0; j < p.x_c.size(); ++j) s += (j ? ";" : "") + format_double(p.x_c[j]);
  s += "|";
  for (std::size_t j = 0; j < p.x_d.size(); ++j) s += (j ? ";" : "") + std::to_string(p.x_d[j]);
  return s;
}

inline std::string describe_config(const EstimatorConfig& c) {
  std::ostringstream os;
  os << "kernel=" << to_string(c.kernel.family) << " c_num=" << format_double(c.numerator.c)
     << " alpha_num=" << format_double(c.numerator.alpha) << " c_den=" << format_double(c.denominator.c)
     << " alpha_den=" << format_double(c.denominator.alpha) << " beta=" << format_double(c.weights.beta)
     << " reflect=" << (c.boundary_reflection ? 1 : 0);
  return os.str();
}

/// Writes a per-(t, x) table: comment header, then `t,<digest>...`.
inline void write_surface_csv(std::ostream& os, const EvaluationLattice& lat, std::span<const double> values,
                              std::string_view quantity, std::string_view mechanism, std::uint64_t n,
                              const EstimatorConfig& config) {
  os << "# quantity=" << quantity << " mechanism=" << mechanism << " n=" << n << ' ' << describe_config(config)
     << '\n';
  for (const auto& p : lat.x_points) os << "# " << point_digest(p) << '=' << describe_point(p) << '\n';
  os << 't';
  for (const auto& p : lat.x_points) os << ',' << point_digest(p);
  os << '\n';
  for (std::size_t t = 0; t < lat.nt(); ++t) {
    os << format_double(lat.t_grid[t]);
    for (std::size_t x = 0; x < lat.nx(); ++x) os << ',' << format_double(values[lat.index(t, x)]);
    os << '\n';
  }
}

}  // namespace hazardstream
