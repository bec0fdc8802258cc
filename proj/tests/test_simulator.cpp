#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hazardstream/simulator.hpp"

using namespace hazardstream;

namespace {

SimModel constant_model(double rate = 1.0) {
  SimModel m;
  m.beta = {0, 0, 0, 0, 0};
  m.alpha_base = {rate, 0, 0, 0, 0};
  m.t_max = 60.0;
  return m;
}

const CovariatePoint kZero{{0.0, 0.0}, {0, 0, 0}};

double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

}  // namespace

TEST(Baseline, ReferenceValues) {
  const auto m = paper_model(ModelFamily::cph);
  EXPECT_NEAR(baseline_hazard(m.alpha_base, 0.0), 0.0, 1e-12);
  const double direct = -20.32 - 1.51 * 2 - 0.08 * 4 + 20.32 * std::exp(0.08 * 2);
  EXPECT_NEAR(baseline_hazard(m.alpha_base, 2.0), direct, 1e-12);
  EXPECT_NEAR(baseline_hazard(m.alpha_base, 2.0), 0.185741, 1e-6);
  for (double t : {0.0, 1.3, 7.0}) EXPECT_EQ(baseline_hazard({1, 0, 0, 0, 0}, t), 1.0);
}

TEST(Baseline, CumulativeMatchesQuadrature) {
  const auto m = paper_model(ModelFamily::cph);
  for (double t : {0.5, 2.0, 5.0, 8.0}) {
    const double q = simpson([&](double s) { return baseline_hazard(m.alpha_base, s); }, 0.0, t);
    EXPECT_NEAR(baseline_cumulative_hazard(m.alpha_base, t), q, 1e-9 * std::max(1.0, q));
  }
}

TEST(Baseline, NegativeBaselineRejectedAtBuild) {
  SimModel m;
  m.alpha_base = {-0.5, 0.1, 0, 0, 0};
  EXPECT_THROW(m.validate(), config_error);
  m = SimModel{};
  m.censoring.rate = 0.0;
  EXPECT_THROW(m.validate(), config_error);
  EXPECT_THROW(DatasetGenerator(m, {}, 1), config_error);
}

TEST(TrueHazard, FamiliesAndProportionality) {
  for (auto fam : {ModelFamily::cph, ModelFamily::aft}) {
    const auto m = paper_model(fam);
    for (double t : {0.3, 2.0, 6.5}) EXPECT_DOUBLE_EQ(true_hazard(m, t, kZero), baseline_hazard(m.alpha_base, t));
  }
  const auto cph = paper_model(ModelFamily::cph);
  const CovariatePoint x{{std::log(2.0) / cph.beta[0], 0.0}, {0, 0, 0}};
  for (double t : {0.3, 2.0, 6.5}) {
    EXPECT_NEAR(true_hazard(cph, t, x), 2.0 * baseline_hazard(cph.alpha_base, t), 1e-12);
    EXPECT_NEAR(true_hazard(cph, t, kZero), true_hazard(paper_model(ModelFamily::aft), t, kZero), 1e-15);
  }
  EXPECT_DOUBLE_EQ(paper_model(ModelFamily::aft).beta[4], 1.9 / 4);
}

TEST(TrueHazard, AftCumulativeIsIntegralOfHazard) {
  const auto m = paper_model(ModelFamily::aft);
  const CovariatePoint x{{1.2, 3.0}, {0, 1, 1}};
  const double q = simpson([&](double s) { return true_hazard(m, s, x); }, 0.0, 6.0);
  EXPECT_NEAR(true_cumulative_hazard(m, 6.0, x), q, 1e-8);
  EXPECT_NEAR(true_survival(m, 6.0, x), std::exp(-q), 1e-8);
}

TEST(Covariates, MarginalFrequencies) {
  const auto m = paper_model(ModelFamily::cph);
  std::mt19937_64 rng(11);
  const int n = 1000000;
  double sx1 = 0, sx2 = 0, lo = 0;
  std::array<int, 3> cat{};
  int relapse = 0;
  const double q25 = x1_quantile(m.covariates.x1, 0.25);
  for (int i = 0; i < n; ++i) {
    const auto x = sample_covariates(m, rng);
    ASSERT_GE(x.x_c[0], -3.0);
    ASSERT_LE(x.x_c[0], 3.0);
    ASSERT_GE(x.x_c[1], 0.0);
    ASSERT_LE(x.x_d[0] + x.x_d[1], 1);
    sx1 += x.x_c[0];
    sx2 += x.x_c[1];
    lo += x.x_c[0] <= q25;
    ++cat[x.x_d[0] ? 1 : (x.x_d[1] ? 2 : 0)];
    relapse += x.x_d[2];
  }
  EXPECT_NEAR(sx2 / n, 2.714, 0.02);
  EXPECT_NEAR(sx1 / n, x1_mean(m.covariates.x1), 0.005);
  EXPECT_NEAR(lo / n, 0.25, 0.002);
  EXPECT_NEAR(static_cast<double>(relapse) / n, 0.51, 0.002);
  EXPECT_NEAR(static_cast<double>(cat[0]) / n, 0.47, 0.002);
  EXPECT_NEAR(static_cast<double>(cat[1]) / n, 0.10, 0.002);
  EXPECT_NEAR(static_cast<double>(cat[2]) / n, 0.43, 0.002);
}

TEST(Covariates, DensityIntegratesToOne) {
  const CovariateLaw law;
  const double i1 = simpson([&](double x) { return x1_density(law.x1, x); }, -3.0, 3.0, 4000);
  EXPECT_NEAR(i1, 1.0, 1e-6);
  double mass = 0.0;
  for (const auto& d : discrete_support()) mass += discrete_mass(law, d);
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_NEAR(x2_mean(law), 0.38 / 0.14, 1e-12);
}

TEST(Covariates, AlternativeX1Transform) {
  SimModel m;
  m.covariates.x1.scale = 3.0;
  m.covariates.x1.offset = -6.0;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double x1 = sample_covariates(m, rng).x_c[0];
    EXPECT_TRUE(x1 > -6.0 && x1 < -3.0);
  }
}

TEST(EventTime, UnitExponentialMedian) {
  const auto m = constant_model();
  const auto d = event_time_from_uniform(m, kZero, 0.5);
  EXPECT_NEAR(d.t, std::log(2.0), 1e-9);
  EXPECT_FALSE(d.overflow);
}

TEST(EventTime, InversionAccuracy) {
  const auto m = paper_model(ModelFamily::cph);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const auto x = sample_covariates(m, rng);
    const double uu = u(rng);
    const auto d = event_time_from_uniform(m, x, uu);
    if (!d.overflow) EXPECT_NEAR(true_survival(m, d.t, x), uu, 1e-10);
    else EXPECT_GT(true_survival(m, m.t_max, x), uu);
  }
}

TEST(EventTime, UnitExponentialMeanAndKs) {
  const auto m = constant_model();
  std::mt19937_64 rng(13);
  const int n = 1000000;
  std::vector<double> t(n);
  for (auto& v : t) v = sample_event_time(m, kZero, rng).t;
  EXPECT_NEAR(std::accumulate(t.begin(), t.end(), 0.0) / n, 1.0, 0.005);
  std::vector<double> s(t.begin(), t.begin() + 100000);
  std::sort(s.begin(), s.end());
  double ks = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double F = 1.0 - std::exp(-s[k]);
    ks = std::max({ks, std::abs(F - static_cast<double>(k) / s.size()), std::abs(F - (k + 1.0) / s.size())});
  }
  EXPECT_LT(ks, 0.006);
}

TEST(EventTime, OverflowFlagged) {
  auto m = constant_model(0.1);
  m.t_max = 1.0;
  const auto d = event_time_from_uniform(m, kZero, 0.5);
  EXPECT_TRUE(d.overflow);
  EXPECT_EQ(d.t, 1.0);
}

TEST(Calibration, HitsTargetsAndIsMonotone) {
  const auto base = paper_model(ModelFamily::cph);
  double prev = std::numeric_limits<double>::infinity();
  for (double target : {0.2, 0.4, 0.6}) {
    const double shift = calibrate_censoring_shift(base, target, 5, 100000);
    EXPECT_LT(shift, prev);
    prev = shift;
    auto m = base;
    m.censoring.shift = shift;
    const auto data = generate_dataset(m, 100000, 99);
    EXPECT_NEAR(data.censored_fraction(), target, 0.01) << target;
  }
}

TEST(Calibration, UnbracketedTargetRejected) {
  EXPECT_THROW(calibrate_censoring_shift(paper_model(ModelFamily::cph), 1.5, 1, 1000), config_error);
  // Most events fall beyond the horizon, so a 20% censoring fraction is unreachable.
  auto m = constant_model(0.01);
  m.t_max = 8.0;
  EXPECT_THROW(calibrate_censoring_shift(m, 0.2, 1, 20000), config_error);
}

TEST(Datasets, NoCensoringWhenShiftIsHuge) {
  auto m = constant_model();
  m.censoring.shift = 1e6;
  const auto d = generate_dataset(m, 5000, 1);
  for (const auto& o : d.rows) EXPECT_EQ(o.status, 1);
}

TEST(Datasets, RightCensoringAgreesWithLatentDraws) {
  auto m = paper_model(ModelFamily::cph);
  m.censoring.shift = 1.0;
  const auto d = generate_dataset(m, 5000, {}, 2, true);
  ASSERT_EQ(d.latent.size(), d.rows.size());
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto& lat = d.latent[i];
    const double t = lat.overflow ? std::numeric_limits<double>::infinity() : lat.t;
    const double c = std::min(lat.c, m.t_max);
    EXPECT_EQ(d.rows[i].y, std::min(t, c));
    EXPECT_EQ(d.rows[i].status, t <= c ? 1 : 0);
  }
}

TEST(Datasets, ModifiedCurrentStatusWithCertainObservation) {
  auto m = paper_model(ModelFamily::cph);
  MechanismSimParams mech;
  mech.kind = MechanismKind::modified_current_status;
  const auto d = generate_dataset(m, 5000, mech, 3);
  for (const auto& o : d.rows) EXPECT_NE(o.status, 2);
  mech.exact_probability = 0.5;
  const auto e = generate_dataset(m, 5000, mech, 3);
  EXPECT_GT(std::count_if(e.rows.begin(), e.rows.end(), [](const auto& o) { return o.status == 2; }), 100);
}

TEST(Datasets, MechanismFieldsPresent) {
  const auto m = paper_model(ModelFamily::cph);
  MechanismSimParams mech;
  mech.kind = MechanismKind::ltrc_cure;
  mech.cure_fraction = 0.2;
  for (const auto& o : generate_dataset(m, 2000, mech, 4).rows) {
    ASSERT_TRUE(o.l && o.c_obs);
    EXPECT_LE(*o.l, o.y);
    EXPECT_NO_THROW(o.validate());
  }
  mech = {};
  mech.kind = MechanismKind::competing_risks;
  mech.cause_weights = {1.0, 2.0, 1.0};
  std::array<int, 4> seen{};
  for (const auto& o : generate_dataset(m, 4000, mech, 5).rows) {
    if (o.status == 1) {
      ASSERT_TRUE(o.cause);
      ++seen[*o.cause];
    } else {
      EXPECT_FALSE(o.cause);
    }
  }
  EXPECT_GT(seen[2], seen[1]);
  EXPECT_GT(seen[3], 0);
  mech = {};
  mech.kind = MechanismKind::left_censoring;
  for (const auto& o : generate_dataset(m, 2000, mech, 6).rows) EXPECT_LE(o.y, std::max(m.t_max, o.y));
}

TEST(Datasets, TruncationAcceptanceFloor) {
  auto m = paper_model(ModelFamily::cph);
  MechanismSimParams mech;
  mech.kind = MechanismKind::ltrc;
  mech.truncation_max = 1e6;
  mech.min_acceptance = 0.01;
  EXPECT_THROW(generate_dataset(m, 1000, mech, 7), data_error);
}

TEST(Datasets, SeedReproducibility) {
  const auto m = paper_model(ModelFamily::aft);
  MechanismSimParams mech;
  mech.kind = MechanismKind::ltrc;
  const auto a = generate_dataset(m, 3000, mech, 42);
  const auto b = generate_dataset(m, 3000, mech, 42);
  const auto c = generate_dataset(m, 3000, mech, 43);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].y, b.rows[i].y);
    EXPECT_EQ(a.rows[i].x_c, b.rows[i].x_c);
    EXPECT_EQ(a.rows[i].l, b.rows[i].l);
    differs |= a.rows[i].y != c.rows[i].y;
  }
  EXPECT_TRUE(differs);
}

TEST(Datasets, HorizonOverflowShare) {
  // Share of event times beyond the horizon at the benchmark parameters.
  for (auto fam : {ModelFamily::cph, ModelFamily::aft}) {
    const auto d = generate_dataset(paper_model(fam), 200000, MechanismSimParams{}, 8);
    const double share = static_cast<double>(d.overflow) / 200000.0;
    EXPECT_GT(share, 0.01);
    EXPECT_LT(share, 0.06);
  }
}
