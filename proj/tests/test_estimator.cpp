#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hazardstream/estimator.hpp"
#include "hazardstream/eval.hpp"
#include "hazardstream/simulator.hpp"
#include "oracles.hpp"

using namespace hazardstream;

namespace {

EstimatorConfig small_config(MechanismKind kind, std::size_t d_c = 2) {
  auto cfg = make_estimator_config(kind, d_c, 0.8, 0.9);
  cfg.weights = WeightScheme(0.5);
  if (is_cure(kind)) cfg.tau = {3.5};
  if (kind == MechanismKind::competing_risks) cfg.causes = 2;
  return cfg;
}

// Interior region of the simulation model: t where plenty of data survive, x at the median.
EvaluationLattice interior_lattice(const SimModel& m, double t_lo = 0.5, double t_hi = 4.0, std::size_t nt = 15) {
  std::vector<CovariatePoint> pts;
  const double x1 = x1_quantile(m.covariates.x1, 0.5), x2 = x2_quantile(m.covariates, 0.5);
  for (std::vector<int> d : {std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 0}}) pts.push_back({{x1, x2}, d});
  return EvaluationLattice(equidistant_grid(t_lo, t_hi, nt), pts, population_standardization(m.covariates));
}

MechanismEstimator fit(const SimModel& m, const EvaluationLattice& lat, const EstimatorConfig& cfg,
                       const MechanismSimParams& mech, std::size_t n, std::uint64_t seed) {
  MechanismEstimator est(lat, cfg);
  DatasetGenerator gen(m, mech, seed);
  for (std::size_t i = 0; i < n; ++i) est.update(gen.next());
  return est;
}

EstimatorConfig sim_config(MechanismKind kind) {
  auto cfg = make_estimator_config(kind, 2, 0.656, 0.875);
  cfg.boundary_reflection = true;
  return cfg;
}

double interior_mise(const FitResult& r, const SimModel& m) { return mise(r.hazard, m); }

// Cure models need the susceptible lifetime to live on [0, tau]: unit exponential, tau = 6.
SimModel exponential_model() {
  SimModel m;
  m.beta = {0, 0, 0, 0, 0};
  m.alpha_base = {1.0, 0, 0, 0, 0};
  m.censoring.shift = calibrate_censoring_shift(m, 0.2, 7, 100000);
  return m;
}

SimModel calibrated_model() {
  auto m = paper_model(ModelFamily::cph);
  m.censoring.shift = calibrate_censoring_shift(m, 0.2, 7, 100000);
  return m;
}

std::vector<Observation> records_for(MechanismKind kind, std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  auto data = oracle::random_records(rng, n, kind == MechanismKind::modified_current_status);
  for (auto& o : data) {
    o.x_c.resize(2, 0.1);
    o.x_d = {static_cast<int>(rng() % 2), 0, 0};
    if (kind == MechanismKind::competing_risks && o.status == 1) o.cause = 1 + static_cast<int>(rng() % 2);
  }
  return data;
}

EvaluationLattice random_lattice() {
  return EvaluationLattice(equidistant_grid(0.0, 4.0, 11),
                           {{{-0.5, 0.3}, {0, 0, 0}}, {{0.4, -0.2}, {1, 0, 0}}, {{0.0, 0.0}, {0, 1, 0}}});
}

constexpr MechanismKind kAllKinds[] = {
    MechanismKind::right_censoring, MechanismKind::left_censoring, MechanismKind::cure_right_censoring,
    MechanismKind::ltrc,            MechanismKind::ltrc_cure,      MechanismKind::modified_current_status,
    MechanismKind::competing_risks};

}  // namespace

TEST(Estimator, MechanismNamesRoundTrip) {
  for (auto k : kAllKinds) EXPECT_EQ(parse_mechanism(to_string(k)), k);
  EXPECT_EQ(parse_mechanism("mcs"), MechanismKind::modified_current_status);
  EXPECT_THROW(parse_mechanism("interval"), config_error);
}

TEST(Estimator, ConfigValidation) {
  const auto lat = random_lattice();
  auto cfg = small_config(MechanismKind::right_censoring);
  cfg.numerator.p = 2;
  EXPECT_THROW(MechanismEstimator(lat, cfg), config_error);
  auto cure = small_config(MechanismKind::cure_right_censoring);
  cure.tau.clear();
  EXPECT_THROW(MechanismEstimator(lat, cure), config_error);
  cure.tau = {10.0};
  EXPECT_THROW(MechanismEstimator(lat, cure), config_error);
  auto rc = small_config(MechanismKind::right_censoring);
  rc.tau = {1.0};
  EXPECT_THROW(MechanismEstimator(lat, rc), config_error);
  auto cr = small_config(MechanismKind::competing_risks);
  cr.causes = 0;
  EXPECT_THROW(MechanismEstimator(lat, cr), config_error);
}

TEST(Estimator, AdmissibilityErrorsLeaveBundleUntouched) {
  const auto lat = random_lattice();
  auto data = records_for(MechanismKind::ltrc_cure, 3, 5);
  {
    MechanismEstimator est(lat, small_config(MechanismKind::ltrc));
    auto o = data[0];
    o.l.reset();
    EXPECT_THROW(est.update(o), data_error);
    EXPECT_EQ(est.count(), 0u);
  }
  {
    MechanismEstimator est(lat, small_config(MechanismKind::ltrc_cure));
    auto o = data[0];
    o.c_obs.reset();
    EXPECT_THROW(est.update(o), data_error);
  }
  {
    MechanismEstimator est(lat, small_config(MechanismKind::right_censoring));
    auto o = data[0];
    o.status = 2;
    EXPECT_THROW(est.update(o), data_error);
    o.status = 1;
    o.x_c = {0.1};
    EXPECT_THROW(est.update(o), data_error);
  }
  {
    MechanismEstimator est(lat, small_config(MechanismKind::modified_current_status));
    auto o = data[0];
    o.status = 3;
    EXPECT_THROW(est.update(o), data_error);
  }
  {
    MechanismEstimator est(lat, small_config(MechanismKind::competing_risks));
    auto o = data[0];
    o.status = 1;
    o.cause.reset();
    EXPECT_THROW(est.update(o), data_error);
    o.cause = 3;
    EXPECT_THROW(est.update(o), data_error);
    o.status = 0;
    EXPECT_NO_THROW(est.update(o));
    EXPECT_EQ(est.count(), 1u);
  }
}

TEST(Estimator, SplitStreamIsBitwiseIdentical) {
  const auto lat = random_lattice();
  for (auto kind : kAllKinds) {
    const auto data = records_for(kind, 40 + static_cast<int>(kind), 150);
    MechanismEstimator whole(lat, small_config(kind));
    for (const auto& o : data) whole.update(o);

    MechanismEstimator first(lat, small_config(kind));
    for (std::size_t i = 0; i < 90; ++i) first.update(data[i]);
    auto resumed = MechanismEstimator::restore(first.snapshot());
    for (std::size_t i = 90; i < data.size(); ++i) resumed.update(data[i]);

    EXPECT_EQ(whole.snapshot(), resumed.snapshot()) << to_string(kind);
    const auto a = whole.assemble();
    const auto b = resumed.assemble();
    EXPECT_EQ(a.hazard.values, b.hazard.values);
    EXPECT_EQ(a.survival.survival, b.survival.survival);
  }
}

TEST(Estimator, SnapshotCorruptionDetected) {
  const auto lat = random_lattice();
  MechanismEstimator est(lat, small_config(MechanismKind::cure_right_censoring));
  for (const auto& o : records_for(MechanismKind::cure_right_censoring, 5, 20)) est.update(o);
  auto bytes = est.snapshot();
  for (std::size_t pos : {std::size_t{0}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x5a;
    EXPECT_THROW(MechanismEstimator::restore(bad), snapshot_error) << pos;
  }
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(MechanismEstimator::restore(bytes), snapshot_error);
}

TEST(Estimator, OutputsAreWellFormedForEveryKind) {
  const auto lat = random_lattice();
  for (auto kind : kAllKinds) {
    MechanismEstimator est(lat, small_config(kind));
    for (const auto& o : records_for(kind, 60 + static_cast<int>(kind), 120)) est.update(o);
    const auto r = est.assemble();
    EXPECT_EQ(r.n, 120u);
    for (double v : r.hazard.values) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
    for (std::size_t x = 0; x < lat.nx(); ++x)
      for (std::size_t t = 0; t < lat.nt(); ++t) {
        const double s = r.survival.at(t, x);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        if (t > 0 && kind != MechanismKind::left_censoring) {
          EXPECT_LE(s, r.survival.at(t - 1, x));
        }
      }
    if (is_cure(kind)) {
      ASSERT_EQ(r.cure_probability.size(), lat.nx());
      for (double p : r.cure_probability) EXPECT_TRUE(p >= 0.0 && p <= 1.0);
    }
    if (kind == MechanismKind::competing_risks) {
      EXPECT_EQ(r.cif.size(), 2u);
    }
    if (kind == MechanismKind::modified_current_status) {
      EXPECT_EQ(r.exact_probability.size(), lat.nx());
    }
  }
}

TEST(Estimator, DigestTracksConfig) {
  const auto a = small_config(MechanismKind::right_censoring);
  auto b = a;
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.numerator.c = 0.81;
  EXPECT_NE(config_digest(a), config_digest(b));
  b = a;
  b.boundary_reflection = true;
  EXPECT_NE(config_digest(a), config_digest(b));
}

// --- simulator-backed checks -------------------------------------------------

TEST(EstimatorSimulation, LeftCensoredDistribution) {
  const auto m = paper_model(ModelFamily::cph);
  const auto lat = interior_lattice(m, 1.0, 5.0, 17);
  MechanismSimParams mech;
  mech.kind = MechanismKind::left_censoring;
  const auto r = fit(m, lat, sim_config(MechanismKind::left_censoring), mech, 2000, 101).assemble();
  std::vector<double> est, truth;
  for (std::size_t x = 0; x < lat.nx(); ++x)
    for (std::size_t t = 0; t < lat.nt(); ++t) {
      est.push_back(1.0 - r.survival.at(t, x));
      truth.push_back(1.0 - true_survival(m, lat.t_grid[t], lat.x_points[x]));
    }
  EXPECT_LT(mise(est, truth), 0.05);
}

TEST(EstimatorSimulation, CureProbabilityRecovered) {
  const auto m = exponential_model();
  // No covariate effect, so a wide covariate bandwidth costs no bias.
  auto base = interior_lattice(m, 0.25, 6.0, 24);
  auto st = base.standardization;
  for (auto& cs : st.center_scale) cs.second *= 3.0;
  const EvaluationLattice lat(base.t_grid, base.x_points, st);
  MechanismSimParams mech;
  mech.kind = MechanismKind::cure_right_censoring;
  mech.cure_fraction = 0.3;
  auto cfg = sim_config(mech.kind);
  cfg.tau = {6.0};
  const auto r = fit(m, lat, cfg, mech, 5000, 102).assemble();
  // Median x: continuous medians in the most frequent discrete cell.
  EXPECT_NEAR(r.cure_probability[0], 0.3, 0.05);
}

TEST(EstimatorSimulation, CureHazardComparableToNoCure) {
  const auto m = exponential_model();
  const auto lat = interior_lattice(m, 0.5, 6.0, 23);
  MechanismSimParams mech;
  mech.kind = MechanismKind::cure_right_censoring;
  mech.cure_fraction = 0.2;
  auto cfg = sim_config(mech.kind);
  cfg.tau = {6.0};
  const auto cure = fit(m, lat, cfg, mech, 5000, 103).assemble();
  const auto plain = fit(m, lat, sim_config(MechanismKind::right_censoring), {}, 5000, 104).assemble();
  EXPECT_EQ(cure.hazard.values.size(), plain.hazard.values.size());
  EXPECT_LT(interior_mise(cure, m), 1.5 * interior_mise(plain, m));
}

TEST(EstimatorSimulation, TruncationCostsLittle) {
  const auto m = calibrated_model();
  const auto lat = interior_lattice(m);
  MechanismSimParams mech;
  mech.kind = MechanismKind::ltrc;
  mech.truncation_max = 1.0;
  const auto trunc = fit(m, lat, sim_config(mech.kind), mech, 5000, 105).assemble();
  const auto plain = fit(m, lat, sim_config(MechanismKind::right_censoring), {}, 5000, 106).assemble();
  EXPECT_LT(interior_mise(trunc, m), 2.0 * interior_mise(plain, m));
}

TEST(EstimatorSimulation, TruncatedCureImprovesWithN) {
  const auto m = exponential_model();
  const auto lat = interior_lattice(m, 0.5, 6.0, 23);
  MechanismSimParams mech;
  mech.kind = MechanismKind::ltrc_cure;
  mech.cure_fraction = 0.2;
  auto cfg = sim_config(mech.kind);
  cfg.tau = {6.0};
  const double small = interior_mise(fit(m, lat, cfg, mech, 1000, 107).assemble(), m);
  const double large = interior_mise(fit(m, lat, cfg, mech, 5000, 108).assemble(), m);
  EXPECT_TRUE(std::isfinite(small));
  EXPECT_LT(large, small);
}

TEST(EstimatorSimulation, ExactObservationProbability) {
  const auto m = calibrated_model();
  const auto lat = interior_lattice(m);
  MechanismSimParams mech;
  mech.kind = MechanismKind::modified_current_status;
  mech.exact_probability = 0.7;
  const auto r = fit(m, lat, sim_config(mech.kind), mech, 5000, 109).assemble();
  EXPECT_NEAR(r.exact_probability[0], 0.7, 0.05);
  for (double p : r.exact_probability) EXPECT_TRUE(p >= 0.0 && p <= 1.0);
}

TEST(EstimatorSimulation, CompetingExponentials) {
  // Constant all-cause hazard 1.5 split 0.5 / 1.0, no effective censoring.
  SimModel m;
  m.beta = {0, 0, 0, 0, 0};
  m.alpha_base = {1.5, 0, 0, 0, 0};
  m.censoring.shift = 100.0;
  const auto lat = interior_lattice(m, 0.1, 8.0, 80);
  MechanismSimParams mech;
  mech.kind = MechanismKind::competing_risks;
  mech.cause_weights = {0.5, 1.0};
  auto cfg = sim_config(mech.kind);
  cfg.causes = 2;
  const auto r = fit(m, lat, cfg, mech, 10000, 110).assemble();
  for (std::size_t x = 0; x < lat.nx(); ++x) {
    EXPECT_NEAR(r.cif[0].cif[lat.index(lat.nt() - 1, x)], 1.0 / 3.0, 0.04);
    for (std::size_t t = 0; t < lat.nt(); ++t) {
      const auto k = lat.index(t, x);
      EXPECT_NEAR(r.cif[0].cif[k] + r.cif[1].cif[k] + r.survival.survival[k], 1.0, 0.05) << t;
    }
  }
}
