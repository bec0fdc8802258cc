// hazardstream: simulate, calibrate, fit, update, predict, bench.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error, 3 data-schema error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hazardstream/hazardstream.hpp"

namespace hs = hazardstream;
using hs::json;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;
constexpr int kData = 3;

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  for (auto part : hs::split(s, ',')) out.emplace_back(part);
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Estimator options shared by fit and update

struct EstimatorOptions {
  std::string mechanism = "right_censoring";
  std::string kernel = "gaussian";
  std::vector<double> bandwidth_c;
  std::vector<double> bandwidth_alpha;
  int preset = 0;
  double beta = 0.0;
  bool reflect = false;
  std::string lattice_t = "0.1:8:100";
  std::string x_points;
  std::string standardize;
  std::vector<double> tau;
  int causes = 1;
  std::string continuous = "x1,x2";
  std::string discrete = "d1,d2,d3";

  std::map<std::string, CLI::Option*> opts;

  void add_to(CLI::App* app) {
    opts["mechanism"] = app->add_option("--mechanism", mechanism, "incompleteness mechanism");
    opts["kernel"] = app->add_option("--kernel", kernel, "gaussian | epanechnikov | triangular");
    opts["bandwidth-c"] = app->add_option("--bandwidth-c", bandwidth_c, "c for numerator[,denominator]")->delimiter(',');
    opts["bandwidth-alpha"] =
        app->add_option("--bandwidth-alpha", bandwidth_alpha, "alpha for numerator[,denominator]")->delimiter(',');
    opts["preset-censoring"] = app->add_option("--preset-censoring", preset, "preset constants for 20|40|60")
                                   ->check(CLI::IsMember({20, 40, 60}));
    opts["beta"] = app->add_option("--beta", beta, "weight exponent");
    opts["reflect-boundary"] = app->add_flag("--reflect-boundary", reflect, "mirror the time kernel at 0");
    opts["lattice-t"] = app->add_option("--lattice-t", lattice_t, "min:max:count");
    opts["x-points"] = app->add_option("--x-points", x_points, "JSON file of covariate points");
    opts["standardize"] = app->add_option("--standardize", standardize, "JSON file from calibrate");
    opts["tau"] = app->add_option("--tau", tau, "cure support bound, one value or one per x-point")->delimiter(',');
    opts["causes"] = app->add_option("--causes", causes, "number of competing causes");
    opts["continuous"] = app->add_option("--continuous", continuous, "continuous covariate columns");
    opts["discrete"] = app->add_option("--discrete", discrete, "discrete covariate columns");
  }

  [[nodiscard]] bool any_estimator_flag() const {
    for (const char* k : {"mechanism", "kernel", "bandwidth-c", "bandwidth-alpha", "preset-censoring", "beta",
                          "reflect-boundary", "tau", "causes"})
      if (opts.at(k)->count() > 0) return true;
    return false;
  }

  [[nodiscard]] hs::DataSchema schema() const { return {split_names(continuous), split_names(discrete)}; }

  [[nodiscard]] hs::EvaluationLattice lattice() const {
    const auto parts = hs::split(lattice_t, ':');
    if (parts.size() != 3) throw hs::config_error("--lattice-t expects min:max:count");
    const auto lo = hs::parse_double(parts[0]);
    const auto hi = hs::parse_double(parts[1]);
    const auto count = hs::parse_int(parts[2]);
    if (!lo || !hi || !count || *count < 1) throw hs::config_error("--lattice-t expects min:max:count");
    auto grid = hs::equidistant_grid(*lo, *hi, static_cast<std::size_t>(*count));
    const auto sch = schema();
    std::vector<hs::CovariatePoint> points;
    hs::Standardization st;
    const bool default_schema = sch == hs::DataSchema{};
    if (!x_points.empty()) {
      points = hs::points_from_json(hs::read_json_file(x_points));
    } else if (default_schema) {
      points = hs::quantile_covariate_grid(hs::CovariateLaw{});
    } else {
      throw hs::config_error("--x-points is required for a non-default covariate schema");
    }
    if (!standardize.empty()) {
      st = hs::standardization_from_json(hs::read_json_file(standardize), sch);
    } else if (default_schema && x_points.empty()) {
      st = hs::population_standardization(hs::CovariateLaw{});
    }
    for (const auto& p : points)
      if (p.x_c.size() != sch.continuous.size() || p.x_d.size() != sch.discrete.size())
        throw hs::config_error("x-points do not match the covariate columns");
    return hs::EvaluationLattice(std::move(grid), std::move(points), std::move(st));
  }

  /// Estimator config; fields not given explicitly come from `base` when set.
  [[nodiscard]] hs::EstimatorConfig config(std::size_t d_c, const hs::EstimatorConfig* base = nullptr) const {
    auto given = [&](const char* k) { return opts.at(k)->count() > 0; };
    hs::EstimatorConfig cfg = base ? *base : hs::make_estimator_config(hs::parse_mechanism(mechanism), d_c, 1.0, 1.0);
    if (!base || given("mechanism")) cfg.mechanism = hs::parse_mechanism(mechanism);
    if (!base || given("kernel")) cfg.kernel.family = hs::parse_kernel_family(kernel);
    if (!base || given("preset-censoring")) {
      if (preset != 0) {
        const auto p = hs::paper_preset(preset);
        cfg.numerator.c = p.c_numerator;
        cfg.denominator.c = p.c_denominator;
      }
    }
    if (given("bandwidth-c")) {
      if (bandwidth_c.empty() || bandwidth_c.size() > 2) throw hs::config_error("--bandwidth-c takes 1 or 2 values");
      cfg.numerator.c = bandwidth_c[0];
      cfg.denominator.c = bandwidth_c.size() == 2 ? bandwidth_c[1] : bandwidth_c[0];
    } else if (!base && preset == 0) {
      cfg.numerator.c = cfg.denominator.c = 1.0;
    }
    if (given("bandwidth-alpha")) {
      if (bandwidth_alpha.empty() || bandwidth_alpha.size() > 2)
        throw hs::config_error("--bandwidth-alpha takes 1 or 2 values");
      cfg.numerator.alpha = bandwidth_alpha[0];
      cfg.denominator.alpha = bandwidth_alpha.size() == 2 ? bandwidth_alpha[1] : bandwidth_alpha[0];
    }
    if (!base || given("beta")) cfg.weights.beta = beta;
    if (!base || given("reflect-boundary")) cfg.boundary_reflection = reflect;
    if (!base || given("tau")) cfg.tau = hs::is_cure(cfg.mechanism) ? tau : std::vector<double>{};
    if (!base || given("causes")) cfg.causes = causes;
    return cfg;
  }
};

struct FitOutputs {
  std::string snapshot;
  std::string prefix;
};

/// Streams `data_path` into the estimator; aborts when more than 1% of the
/// rows are malformed.
std::uint64_t stream_into(hs::MechanismEstimator& est, const std::string& data_path, const hs::DataSchema& schema,
                          const std::string& report_path) {
  std::ifstream in(data_path);
  if (!in) throw std::runtime_error("cannot open '" + data_path + "'");
  hs::ObservationReader reader(in, hs::ObservationReader::format_for_path(data_path), schema,
                               hs::columns_for(est.config().mechanism));
  hs::Observation obs;
  std::uint64_t used = 0;
  while (reader.next(obs)) {
    try {
      est.update(obs);
      ++used;
    } catch (const hs::data_error& e) {
      reader.reject(e.what());
    }
  }
  if (!reader.malformed().empty()) {
    auto rep = open_out(report_path);
    rep << "line,reason\n";
    for (const auto& m : reader.malformed()) rep << m.line << ",\"" << m.reason << "\"\n";
    std::cerr << "warning: skipped " << reader.malformed().size() << " malformed rows (see " << report_path
              << ")\n";
  }
  if (reader.malformed_fraction() > 0.01)
    throw hs::data_error("more than 1% of the rows are malformed (" + std::to_string(reader.malformed().size()) +
                         " of " + std::to_string(reader.rows()) + ")");
  if (reader.rows() == 0) std::cerr << "warning: no data rows in '" << data_path << "'\n";
  return used;
}

void write_outputs(const hs::MechanismEstimator& est, const FitOutputs& out) {
  write_bytes(out.snapshot, est.snapshot());
  const auto fit = est.assemble();
  const auto& lat = est.lattice();
  const auto mech = hs::to_string(fit.mechanism);
  const auto& cfg = est.config();
  {
    auto os = open_out(out.prefix + "_hazard.csv");
    const char* q = fit.mechanism == hs::MechanismKind::left_censoring ? "reverse_hazard" : "hazard";
    hs::write_surface_csv(os, lat, fit.hazard.values, q, mech, fit.n, cfg);
  }
  {
    auto os = open_out(out.prefix + "_cumhaz.csv");
    hs::write_surface_csv(os, lat, fit.survival.cumulative_hazard, "cumulative_hazard", mech, fit.n, cfg);
  }
  {
    auto os = open_out(out.prefix + "_survival.csv");
    hs::write_surface_csv(os, lat, fit.survival.survival, "survival", mech, fit.n, cfg);
  }
  if (!fit.cure_probability.empty()) {
    auto os = open_out(out.prefix + "_cure.csv");
    os << "x,cure_probability\n";
    for (std::size_t x = 0; x < lat.nx(); ++x)
      os << hs::point_digest(lat.x_points[x]) << ',' << hs::format_double(fit.cure_probability[x]) << '\n';
  }
  for (std::size_t j = 0; j < fit.cif.size(); ++j) {
    auto os = open_out(out.prefix + "_cif" + std::to_string(j + 1) + ".csv");
    hs::write_surface_csv(os, lat, fit.cif[j].cif, "cif" + std::to_string(j + 1), mech, fit.n, cfg);
  }
  if (fit.diagnostics.floored_points > 0)
    std::cerr << "warning: " << fit.diagnostics.floored_points << " denominators floored at 1/n\n";
}

std::string default_prefix(const std::string& snapshot) {
  std::filesystem::path p(snapshot);
  return (p.parent_path() / p.stem()).string();
}

// ---------------------------------------------------------------------------
// Commands

struct SimulateOptions {
  std::string model = "cph";
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::optional<double> censoring;
  std::optional<double> shift;
  std::string mechanism = "right_censoring";
  double truncation_max = 1.0;
  double cure_fraction = 0.0;
  double exact_probability = 1.0;
  std::vector<double> cause_weights{1.0};
  double x1_scale = 6.0;
  double x1_offset = -3.0;
  std::size_t calibration_draws = 200000;
  std::string out;
};

int cmd_simulate(const SimulateOptions& o) {
  auto model = hs::paper_model(hs::parse_model_family(o.model));
  model.covariates.x1.scale = o.x1_scale;
  model.covariates.x1.offset = o.x1_offset;
  model.seed = o.seed;
  hs::MechanismSimParams mech;
  mech.kind = hs::parse_mechanism(o.mechanism);
  mech.truncation_max = o.truncation_max;
  mech.cure_fraction = o.cure_fraction;
  mech.exact_probability = o.exact_probability;
  mech.cause_weights = o.cause_weights;
  if (o.shift) model.censoring.shift = *o.shift;
  if (o.censoring) {
    model.target_censor_fraction = *o.censoring;
    model.censoring.shift = hs::calibrate_censoring_shift(model, *o.censoring, hs::splitmix64(o.seed ^ 0xCA1ULL),
                                                          o.calibration_draws);
  }
  const auto cols = hs::columns_for(mech.kind);
  auto out = open_out(o.out);
  out << hs::dataset_header(hs::DataSchema{}, cols) << '\n';
  hs::DatasetGenerator gen(model, mech, o.seed);
  std::uint64_t censored = 0;
  for (std::size_t i = 0; i < o.n; ++i) {
    const auto obs = gen.next();
    censored += obs.status != 1;
    hs::write_dataset_row(out, obs, cols);
  }
  out.close();
  if (!out) throw std::runtime_error("write failed for '" + o.out + "'");
  json side{{"model", hs::to_json(model)},
            {"seed", o.seed},
            {"n", o.n},
            {"mechanism",
             {{"kind", std::string(hs::to_string(mech.kind))},
              {"truncation_max", mech.truncation_max},
              {"cure_fraction", mech.cure_fraction},
              {"exact_probability", mech.exact_probability},
              {"cause_weights", mech.cause_weights}}},
            {"censoring_shift", model.censoring.shift},
            {"calibrated", o.censoring.has_value()},
            {"empirical_censored_fraction", o.n ? static_cast<double>(censored) / static_cast<double>(o.n) : 0.0},
            {"horizon_overflow", gen.overflow_count()},
            {"attempts", gen.attempts()}};
  auto sj = open_out(o.out + ".json");
  sj << side.dump(2) << '\n';
  return kOk;
}

int cmd_calibrate(const std::string& data, const std::string& out_path, const hs::DataSchema& schema) {
  std::ifstream in(data);
  if (!in) throw std::runtime_error("cannot open '" + data + "'");
  hs::ObservationReader reader(in, hs::ObservationReader::format_for_path(data), schema, {});
  const std::size_t dc = schema.continuous.size();
  std::vector<std::vector<double>> cols(dc);
  std::set<std::vector<int>> combos;
  hs::Observation obs;
  while (reader.next(obs)) {
    for (std::size_t j = 0; j < dc; ++j) cols[j].push_back(obs.x_c[j]);
    combos.insert(obs.x_d);
  }
  if (reader.malformed_fraction() > 0.01) throw hs::data_error("more than 1% of the rows are malformed");
  if (cols.empty() || cols[0].size() < 2) throw hs::data_error("calibrate: need at least two rows");
  hs::Standardization st;
  std::vector<std::vector<double>> quant(dc);
  for (std::size_t j = 0; j < dc; ++j) {
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double v : cols[j]) {
      ++k;
      const double d = v - mean;
      mean += d / static_cast<double>(k);
      m2 += d * (v - mean);
    }
    const double sd = std::sqrt(m2 / static_cast<double>(k - 1));
    if (!(sd > 0.0)) throw hs::data_error("calibrate: column '" + schema.continuous[j] + "' has zero variance");
    st.center_scale.emplace_back(mean, sd);
    for (double q : {0.25, 0.5, 0.75}) quant[j].push_back(hs::sample_quantile(cols[j], q));
  }
  const auto points = hs::covariate_grid(quant, {combos.begin(), combos.end()});
  json doc = hs::to_json(st, schema);
  doc["points"] = hs::to_json(points);
  doc["rows"] = cols[0].size();
  auto out = open_out(out_path);
  out << doc.dump(2) << '\n';
  return kOk;
}

int cmd_fit(const EstimatorOptions& eo, const std::string& data, const FitOutputs& out) {
  const auto lattice = eo.lattice();
  hs::MechanismEstimator est(lattice, eo.config(lattice.d_c()));
  const auto used = stream_into(est, data, eo.schema(), out.prefix + "_malformed.csv");
  write_outputs(est, out);
  std::cout << json{{"records", used}, {"n", est.count()}, {"snapshot", out.snapshot}}.dump() << '\n';
  return kOk;
}

int cmd_update(const EstimatorOptions& eo, const std::string& snapshot, const std::string& data,
               const FitOutputs& out) {
  auto est = hs::MechanismEstimator::restore(read_bytes(snapshot));
  if (eo.any_estimator_flag()) {
    const auto requested = eo.config(est.lattice().d_c(), &est.config());
    if (hs::config_digest(requested) != hs::config_digest(est.config()))
      throw hs::config_error("update: run configuration does not match the snapshot (digest mismatch)");
  }
  const auto used = stream_into(est, data, eo.schema(), out.prefix + "_malformed.csv");
  write_outputs(est, out);
  std::cout << json{{"records", used}, {"n", est.count()}, {"snapshot", out.snapshot}}.dump() << '\n';
  return kOk;
}

int cmd_predict(const std::string& snapshot, const std::string& query, const std::string& out_path,
                const hs::DataSchema& schema) {
  const auto est = hs::MechanismEstimator::restore(read_bytes(snapshot));
  const auto fit = est.assemble();
  const auto& lat = est.lattice();
  const auto& g = lat.t_grid;
  const std::size_t nt = lat.nt();
  if (schema.continuous.size() != lat.d_c() || schema.discrete.size() != lat.d_d())
    throw hs::config_error("predict: covariate columns do not match the snapshot lattice");

  std::ifstream in(query);
  if (!in) throw std::runtime_error("cannot open '" + query + "'");
  std::string line;
  if (!std::getline(in, line)) throw hs::data_error("predict: empty query file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::map<std::string, std::size_t> pos;
  const auto head = hs::split(line, ',');
  for (std::size_t k = 0; k < head.size(); ++k) pos[std::string(head[k])] = k;
  auto need = [&](const std::string& n) {
    auto it = pos.find(n);
    if (it == pos.end()) throw hs::data_error("schema: query file lacks column '" + n + "'");
    return it->second;
  };
  const auto it_col = need("t");
  std::vector<std::size_t> ic, id;
  for (const auto& n : schema.continuous) ic.push_back(need(n));
  for (const auto& n : schema.discrete) id.push_back(need(n));

  auto out = open_out(out_path);
  out << "t";
  for (const auto& n : schema.continuous) out << ',' << n;
  for (const auto& n : schema.discrete) out << ',' << n;
  out << ",t_used,hazard,cumulative_hazard,survival,clamped,error\n";
  std::size_t errors = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto f = hs::split(line, ',');
    auto fail = [&](const std::string& why) {
      ++errors;
      out << line;
      const std::size_t echoed = f.size();
      for (std::size_t k = echoed; k < 1 + ic.size() + id.size(); ++k) out << ',';
      out << ",,,,,0," << why << '\n';
    };
    if (f.size() != head.size()) {
      fail("field count");
      continue;
    }
    const auto t = hs::parse_double(f[it_col]);
    hs::CovariatePoint p;
    bool ok = t.has_value() && std::isfinite(*t) && *t >= 0.0;
    for (auto k : ic) {
      const auto v = hs::parse_double(f[k]);
      ok = ok && v.has_value();
      p.x_c.push_back(v.value_or(0.0));
    }
    for (auto k : id) {
      const auto v = hs::parse_int(f[k]);
      ok = ok && v.has_value();
      p.x_d.push_back(v.value_or(0));
    }
    if (!ok) {
      fail("unparseable");
      continue;
    }
    const auto xi = lat.find_x(p);
    if (!xi) {
      fail("off-lattice covariates");
      continue;
    }
    const bool clamped = *t > g.back();
    const double tu = clamped ? g.back() : *t;
    const auto hz = fit.hazard.curve(*xi);
    const auto cum = std::span<const double>(fit.survival.cumulative_hazard).subspan(*xi * nt, nt);
    const auto sv = fit.survival.curve(*xi);
    double h, L, S;
    auto lb = std::lower_bound(g.begin(), g.end(), tu);
    const auto k = static_cast<std::size_t>(lb - g.begin());
    if (tu <= g.front()) {
      h = hz[0];
      L = k == 0 && tu == g.front() ? cum[0] : hz[0] * tu;
      S = tu == g.front() ? sv[0] : std::exp(-L);
    } else if (g[k] == tu) {
      h = hz[k];
      L = cum[k];
      S = sv[k];
    } else {
      const double w = (tu - g[k - 1]) / (g[k] - g[k - 1]);
      h = (1.0 - w) * hz[k - 1] + w * hz[k];
      L = (1.0 - w) * cum[k - 1] + w * cum[k];
      S = fit.mechanism == hs::MechanismKind::left_censoring ? (1.0 - w) * sv[k - 1] + w * sv[k] : std::exp(-L);
    }
    S = std::clamp(S, 0.0, 1.0);
    out << line << ',' << hs::format_double(tu) << ',' << hs::format_double(h) << ',' << hs::format_double(L) << ','
        << hs::format_double(S) << ',' << (clamped ? 1 : 0) << ",\n";
  }
  if (errors > 0) {
    std::cerr << "warning: " << errors << " query rows could not be evaluated\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_bench(const std::string& plan_path, const std::string& out_path, const std::string& plot_path,
              std::optional<std::uint64_t> seed, unsigned threads) {
  hs::BenchPlan plan;
  json j = plan_path.empty() ? json::object() : hs::read_json_file(plan_path);
  try {
    plan.model = hs::paper_model(hs::parse_model_family(j.value("model", std::string("cph"))));
    if (j.contains("x1_transform")) {
      plan.model.covariates.x1.scale = j["x1_transform"].value("scale", 6.0);
      plan.model.covariates.x1.offset = j["x1_transform"].value("offset", -3.0);
    }
    if (j.contains("sample_sizes")) plan.sample_sizes = j["sample_sizes"].get<std::vector<std::size_t>>();
    plan.replications = j.value("replications", plan.replications);
    if (j.contains("censor_targets")) plan.censor_targets = j["censor_targets"].get<std::vector<double>>();
    plan.seed = j.value("seed", plan.seed);
    plan.kernel.family = hs::parse_kernel_family(j.value("kernel", std::string("gaussian")));
    plan.beta = j.value("beta", 0.0);
    plan.boundary_reflection = j.value("reflect_boundary", plan.boundary_reflection);
    plan.calibration_draws = j.value("calibration_draws", plan.calibration_draws);
    if (j.contains("presets"))
      for (auto& [k, v] : j["presets"].items()) {
        const auto c = v.get<std::vector<double>>();
        if (c.size() != 2) throw hs::config_error("bench: presets take [c_numerator, c_denominator]");
        plan.presets[std::stoi(k)] = {c[0], c[1]};
      }
  } catch (const json::exception& e) {
    throw hs::config_error(std::string("bench plan: ") + e.what());
  }
  if (seed) plan.seed = *seed;
  plan.threads = threads;
  plan.collect_mean_curves = !plot_path.empty();
  const auto result = hs::run_bench(plan);
  if (out_path.empty() || out_path == "-") {
    hs::write_bench_csv(std::cout, result);
  } else {
    auto os = open_out(out_path);
    hs::write_bench_csv(os, result);
  }
  if (!plot_path.empty()) {
    auto os = open_out(plot_path);
    hs::write_plot_data(os, result);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive kernel estimation of conditional hazards on data streams"};
  app.require_subcommand(1);

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset and JSON sidecar");
  sim->add_option("--model", so.model, "cph | aft");
  sim->add_option("--n", so.n, "number of records");
  sim->add_option("--seed", so.seed, "random seed");
  sim->add_option("--censoring", so.censoring, "target censored fraction (calibrates the shift)");
  sim->add_option("--shift", so.shift, "censoring shift mu_C");
  sim->add_option("--mechanism", so.mechanism, "incompleteness mechanism");
  sim->add_option("--truncation-max", so.truncation_max, "L ~ Uniform(0, value)");
  sim->add_option("--cure-fraction", so.cure_fraction, "P(T = infinity)");
  sim->add_option("--exact-probability", so.exact_probability, "p(x) for modified current status");
  sim->add_option("--cause-weights", so.cause_weights, "cause probabilities")->delimiter(',');
  sim->add_option("--x1-scale", so.x1_scale, "x1 = scale * A + offset");
  sim->add_option("--x1-offset", so.x1_offset, "x1 = scale * A + offset");
  sim->add_option("--calibration-draws", so.calibration_draws, "Monte Carlo draws for calibration");
  sim->add_option("--out", so.out, "dataset CSV path")->required();

  std::string cal_data, cal_out, cal_cont = "x1,x2", cal_disc = "d1,d2,d3";
  auto* cal = app.add_subcommand("calibrate", "standardization and quantile x-grid from data");
  cal->add_option("--data", cal_data, "dataset CSV or JSONL")->required();
  cal->add_option("--out", cal_out, "output JSON")->required();
  cal->add_option("--continuous", cal_cont, "continuous covariate columns");
  cal->add_option("--discrete", cal_disc, "discrete covariate columns");

  EstimatorOptions fit_o;
  std::string fit_data;
  FitOutputs fit_out;
  auto* fit = app.add_subcommand("fit", "stream a dataset into a new estimator");
  fit_o.add_to(fit);
  fit->add_option("--data", fit_data, "dataset CSV or JSONL")->required();
  fit->add_option("--snapshot", fit_out.snapshot, "snapshot output path")->required();
  fit->add_option("--out-prefix", fit_out.prefix, "prefix for surface CSVs");
  std::uint64_t unused_seed = 0;
  fit->add_option("--seed", unused_seed, "accepted for symmetry; fitting is deterministic");

  EstimatorOptions upd_o;
  std::string upd_snapshot, upd_data;
  FitOutputs upd_out;
  auto* upd = app.add_subcommand("update", "continue a snapshot with more data");
  upd_o.add_to(upd);
  upd->add_option("--from", upd_snapshot, "existing snapshot")->required();
  upd->add_option("--data", upd_data, "dataset CSV or JSONL")->required();
  upd->add_option("--snapshot", upd_out.snapshot, "new snapshot path")->required();
  upd->add_option("--out-prefix", upd_out.prefix, "prefix for surface CSVs");

  std::string pr_snapshot, pr_query, pr_out, pr_cont = "x1,x2", pr_disc = "d1,d2,d3";
  auto* pred = app.add_subcommand("predict", "evaluate hazard, cumulative hazard and survival at query rows");
  pred->add_option("--snapshot", pr_snapshot, "snapshot")->required();
  pred->add_option("--query", pr_query, "CSV with t and covariate columns")->required();
  pred->add_option("--out", pr_out, "output CSV")->required();
  pred->add_option("--continuous", pr_cont, "continuous covariate columns");
  pred->add_option("--discrete", pr_disc, "discrete covariate columns");

  std::string b_plan, b_out, b_plot;
  std::optional<std::uint64_t> b_seed;
  unsigned b_threads = 0;
  auto* bench = app.add_subcommand("bench", "replicated MISE benchmark against the simulator truth");
  bench->add_option("--plan", b_plan, "plan JSON");
  bench->add_option("--out", b_out, "result CSV (default stdout)");
  bench->add_option("--emit-plot-data", b_plot, "mean estimate curves CSV");
  bench->add_option("--seed", b_seed, "master seed");
  bench->add_option("--threads", b_threads, "worker threads (capped by HAZARDSTREAM_THREADS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(so);
    if (*cal) return cmd_calibrate(cal_data, cal_out, {split_names(cal_cont), split_names(cal_disc)});
    if (*fit) {
      if (fit_out.prefix.empty()) fit_out.prefix = default_prefix(fit_out.snapshot);
      return cmd_fit(fit_o, fit_data, fit_out);
    }
    if (*upd) {
      if (upd_out.prefix.empty()) upd_out.prefix = default_prefix(upd_out.snapshot);
      return cmd_update(upd_o, upd_snapshot, upd_data, upd_out);
    }
    if (*pred) return cmd_predict(pr_snapshot, pr_query, pr_out, {split_names(pr_cont), split_names(pr_disc)});
    if (*bench) return cmd_bench(b_plan, b_out, b_plot, b_seed, b_threads);
  } catch (const hs::config_error& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help() ;
    return kUsage;
  } catch (const hs::data_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
