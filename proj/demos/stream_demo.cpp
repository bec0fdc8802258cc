// Streams simulated right-censored records through a hazard estimator in two
// sessions joined by a snapshot, then prints estimated and true survival.

#include <cstdio>
#include <vector>

#include "hazardstream/hazardstream.hpp"

using namespace hazardstream;

int main() {
  auto model = paper_model(ModelFamily::cph);
  model.censoring.shift = calibrate_censoring_shift(model, 0.2, 11, 50000);

  const auto& law = model.covariates;
  const std::vector<CovariatePoint> points{
      {{x1_quantile(law.x1, 0.5), x2_quantile(law, 0.5)}, {0, 0, 0}},
      {{x1_quantile(law.x1, 0.5), x2_quantile(law, 0.5)}, {0, 0, 1}},
  };
  const EvaluationLattice lattice(equidistant_grid(0.1, 6.0, 60), points, population_standardization(law));
  const auto preset = paper_preset(20);
  auto config = make_estimator_config(MechanismKind::right_censoring, 2, preset.c_numerator, preset.c_denominator);
  config.boundary_reflection = true;

  DatasetGenerator source(model, {}, 2024);

  MechanismEstimator first(lattice, config);
  for (int i = 0; i < 3000; ++i) first.update(source.next());
  const auto bytes = first.snapshot();
  std::printf("session 1: %llu records, snapshot %zu bytes\n", static_cast<unsigned long long>(first.count()),
              bytes.size());

  auto second = MechanismEstimator::restore(bytes);
  for (int i = 0; i < 7000; ++i) second.update(source.next());
  const auto fit = second.assemble();
  std::printf("session 2: %llu records\n\n", static_cast<unsigned long long>(second.count()));

  for (std::size_t x = 0; x < lattice.nx(); ++x) {
    std::printf("relapse=%d\n     t   S_hat  S_true  lambda_hat  lambda_true\n", points[x].x_d[2]);
    for (std::size_t t = 9; t < lattice.nt(); t += 10) {
      const double tt = lattice.t_grid[t];
      std::printf("%6.2f  %6.3f  %6.3f  %10.3f  %11.3f\n", tt, fit.survival.at(t, x), true_survival(model, tt, points[x]),
                  fit.hazard.at(t, x), true_hazard(model, tt, points[x]));
    }
    std::printf("\n");
  }
}
