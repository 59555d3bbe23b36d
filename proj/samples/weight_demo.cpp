// Library-level walk through: simulate a herd, compare the three weight
// models on a longitudinal split and print the report.
//
//   weight_demo [seed]

#include <cstdlib>
#include <iostream>

#include "calfweight/evalharness.hpp"
#include "calfweight/synthgen.hpp"

using namespace calfweight;

int main(int argc, char** argv) {
  SynthConfig herd;
  herd.n_calves = 16;
  herd.seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  const auto rows = generate_table(herd);
  const Dataset data = dataset_of(rows);
  std::cout << "simulated " << data.size() << " observations of " << herd.n_calves << " calves\n";

  auto gbm = model_spec(ModelKind::Gbm);
  gbm.tuning = GbmTuning{};
  gbm.tuning->iterations = 10;
  gbm.tuning->space.n_estimators_hi = 300;

  LongitudinalOptions opt;
  opt.ratios = {80, 60};
  opt.iterations = 20;
  opt.seed = herd.seed;
  try {
    const auto table = longitudinal_eval(data, {model_spec(ModelKind::Ols), gbm, model_spec(ModelKind::Lmm)}, opt);
    std::cout << format_comparison_csv(table);
    const auto& r2 = table.at("r2", "80:20");
    std::cout << "mean r2 at 80:20:";
    for (std::size_t m = 0; m < table.models.size(); ++m) std::cout << ' ' << table.models[m] << '=' << r2.mean[m];
    std::cout << '\n';
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
