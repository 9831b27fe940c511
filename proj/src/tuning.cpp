#include "angletl/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "angletl/csv.hpp"
#include "angletl/errors.hpp"
#include "angletl/estimators.hpp"
#include "angletl/parallel.hpp"
#include "angletl/rng.hpp"

namespace angletl {

TuneGrid TuneGrid::defaults(Mode mode) {
  TuneGrid grid;
  grid.mode = mode;
  const int n_lambda = 50;
  grid.lambdas.resize(n_lambda);
  const double lo = std::log(1e-4), hi = std::log(1e4);
  for (int i = 0; i < n_lambda; ++i)
    grid.lambdas[i] = std::exp(lo + (hi - lo) * i / (n_lambda - 1));
  const int n_ratio = 21;
  grid.eta_ratios.resize(n_ratio);
  for (int i = 0; i < n_ratio; ++i) grid.eta_ratios[i] = -1.0 + 4.0 * i / (n_ratio - 1);
  grid.eta_ratios[5] = 0.0;   // exact benchmark points
  grid.eta_ratios[10] = 1.0;
  return grid;
}

void TuneGrid::validate() const {
  if (lambdas.size() < 1) throw parameter_error("tuning grid has no lambda values");
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw parameter_error("tuning lambdas must be positive");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
      throw parameter_error("tuning lambdas must be strictly increasing");
  }
  if (mode == Mode::angle && eta_ratios.size() < 1)
    throw parameter_error("tuning grid has no eta ratios");
}

std::vector<double> TuneGrid::active_ratios() const {
  switch (mode) {
    case Mode::dist:
      return {1.0};
    case Mode::target_only:
      return {0.0};
    case Mode::angle:
    default:
      return std::vector<double>(eta_ratios.begin(), eta_ratios.end());
  }
}

std::vector<int> CvPlan::fold_of(int n) const {
  if (n_folds < 2) throw parameter_error("cross-validation needs at least 2 folds");
  if (n < n_folds)
    throw parameter_error("cannot split " + std::to_string(n) + " samples into " +
                          std::to_string(n_folds) + " folds without an empty training set");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng::Stream stream(rng::mix_seed({seed, 0x666f6c6473ULL}));  // "folds" tag
  stream.shuffle(order);
  std::vector<int> assignment(n);
  for (int i = 0; i < n; ++i) assignment[order[i]] = i % n_folds;
  return assignment;
}

CvResult cross_validate(const Dataset& data, const SourceEstimate& source, const TuneGrid& grid,
                        const CvPlan& plan, int threads) {
  grid.validate();
  validate_pairing(data.X, data.Y, source.w_hat);
  const int n = static_cast<int>(data.n());
  const std::vector<int> assignment = plan.fold_of(n);
  const std::vector<double> ratios = grid.active_ratios();
  const Eigen::Index n_lambda = grid.lambdas.size();
  const std::size_t n_points = static_cast<std::size_t>(n_lambda) * ratios.size();

  CvResult result;
  result.fold_assignment = assignment;
  result.surface.resize(n_points);
  result.fold_sse = Eigen::MatrixXd::Zero(plan.n_folds, static_cast<Eigen::Index>(n_points));

  for (std::size_t pt = 0; pt < n_points; ++pt) {
    const double lambda = grid.lambdas[static_cast<Eigen::Index>(pt / ratios.size())];
    result.surface[pt].lambda = lambda;
    result.surface[pt].eta = ratios[pt % ratios.size()] * lambda;
  }

  for (int fold = 0; fold < plan.n_folds; ++fold) {
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < n; ++i) (assignment[i] == fold ? test_rows : train_rows).push_back(i);

    Eigen::MatrixXd x_train(train_rows.size(), data.p()), x_test(test_rows.size(), data.p());
    Eigen::VectorXd y_train(train_rows.size()), y_test(test_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      x_train.row(static_cast<Eigen::Index>(i)) = data.X.row(train_rows[i]);
      y_train[static_cast<Eigen::Index>(i)] = data.Y[train_rows[i]];
    }
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      x_test.row(static_cast<Eigen::Index>(i)) = data.X.row(test_rows[i]);
      y_test[static_cast<Eigen::Index>(i)] = data.Y[test_rows[i]];
    }

    const RidgeSweep sweep(x_train, y_train, source.w_hat);
    const RidgeSweep::TestCache cache = sweep.make_test_cache(x_test);

    parallel_for(static_cast<std::int64_t>(n_points), threads, [&](std::int64_t pt) {
      const CvPoint& point = result.surface[static_cast<std::size_t>(pt)];
      const Eigen::VectorXd pred = sweep.predict(cache, point.lambda, point.eta);
      result.fold_sse(fold, static_cast<Eigen::Index>(pt)) = (pred - y_test).squaredNorm();
    });
  }

  for (std::size_t pt = 0; pt < n_points; ++pt)
    result.surface[pt].cv_mse =
        result.fold_sse.col(static_cast<Eigen::Index>(pt)).sum() / static_cast<double>(n);

  // Deterministic argmin: smaller lambda wins ties, then smaller |eta|,
  // then the nonnegative eta.
  std::size_t best = 0;
  auto better = [](const CvPoint& a, const CvPoint& b) {
    if (a.cv_mse != b.cv_mse) return a.cv_mse < b.cv_mse;
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    if (std::abs(a.eta) != std::abs(b.eta)) return std::abs(a.eta) < std::abs(b.eta);
    return a.eta > b.eta;
  };
  for (std::size_t pt = 1; pt < n_points; ++pt)
    if (better(result.surface[pt], result.surface[best])) best = pt;
  result.best = PenaltyConfig{result.surface[best].lambda, result.surface[best].eta};
  return result;
}

FitResult refit_best(const Dataset& data, const SourceEstimate& source, const PenaltyConfig& best) {
  return fit_angle_tl(data, source, best);
}

void write_cv_surface_csv(const std::string& path, const CvResult& result) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << "lambda,eta,cv_mse\n";
  for (const CvPoint& point : result.surface)
    out << format_full(point.lambda) << ',' << format_full(point.eta) << ','
        << format_full(point.cv_mse) << '\n';
  if (!out) throw io_error("write to '" + path + "' failed");
}

}  // namespace angletl
