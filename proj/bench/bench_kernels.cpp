// Timing comparison between the serial reference paths and the OpenMP
// kernels: the cross-validation grid sweep and the replicate loop of the
// noiseless risk study.

#include <chrono>
#include <cstdio>

#include "angletl/parallel.hpp"
#include "angletl/rng.hpp"
#include "angletl/simulation.hpp"
#include "angletl/tuning.hpp"

using namespace angletl;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void bench_cv(int threads, bool print_header) {
  rng::Stream stream(7);
  const int n = 300, p = 600;
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = stream.normal();
  const Eigen::VectorXd beta = stream.normal_vector(p) / std::sqrt(static_cast<double>(p));
  const Eigen::VectorXd y = x * beta + stream.normal_vector(n);
  const Dataset data(x, y);
  const SourceEstimate source(stream.normal_vector(p));
  const TuneGrid grid = TuneGrid::defaults();
  const CvPlan plan{5, 11};

  const auto start = std::chrono::steady_clock::now();
  const CvResult cv = cross_validate(data, source, grid, plan, threads);
  const double elapsed = seconds_since(start);
  if (print_header) std::printf("cv sweep      n=%d p=%d grid=%zu folds=%d\n", n, p,
                                cv.surface.size(), plan.n_folds);
  std::printf("  threads=%d  %.3fs  (best lambda %.4g)\n", threads, elapsed, cv.best.lambda);
}

void bench_simulation(int threads, bool print_header) {
  ExperimentSpec spec;
  spec.figure = ExperimentSpec::Figure::fig2_noiseless_risk;
  spec.replicates = 60;
  spec.panels = {{0.9, 2.0, 2.0}};
  const auto start = std::chrono::steady_clock::now();
  const SimulationResult result = run_experiment(spec, threads);
  const double elapsed = seconds_since(start);
  if (print_header)
    std::printf("risk curves   replicates=%d lambdas=%d\n", spec.replicates, spec.lambda_count);
  std::printf("  threads=%d  %.3fs  (%zu rows)\n", threads, elapsed, result.curves.size());
}

}  // namespace

int main() {
  const int hw = hardware_threads();
  std::printf("hardware threads: %d\n\n", hw);
  bench_cv(1, true);
  if (hw > 1) bench_cv(hw, false);
  std::printf("\n");
  bench_simulation(1, true);
  if (hw > 1) bench_simulation(hw, false);
  return 0;
}
