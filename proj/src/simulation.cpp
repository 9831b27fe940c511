#include "angletl/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "angletl/aggregation.hpp"
#include "angletl/csv.hpp"
#include "angletl/errors.hpp"
#include "angletl/estimators.hpp"
#include "angletl/parallel.hpp"
#include "angletl/rmt.hpp"
#include "angletl/tuning.hpp"

namespace angletl {

namespace {

constexpr std::uint64_t kPanelSetupTag = 0x70616e656cULL;  // reserved, never a replicate index

constexpr double sigma_noise = 0.5;  // sigma^2 used throughout the studies

}  // namespace

void draw_coef_pair(rng::Stream& stream, int p, double alpha_t, double alpha_s, double rho,
                    Eigen::VectorXd& w, Eigen::VectorXd& beta) {
  if (p < 1) throw parameter_error("coefficient dimension must be positive");
  if (!(rho >= -1.0 && rho <= 1.0)) throw parameter_error("rho must lie in [-1, 1]");
  w.resize(p);
  beta.resize(p);
  const double sw = alpha_s / std::sqrt(static_cast<double>(p));
  const double sb = alpha_t / std::sqrt(static_cast<double>(p));
  const double ortho = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (int j = 0; j < p; ++j) {
    const double z1 = stream.normal();
    const double z2 = stream.normal();
    w[j] = sw * z1;
    beta[j] = sb * (rho * z1 + ortho * z2);
  }
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gen_coef_pair(const CoefPairConfig& cfg) {
  rng::Stream stream(cfg.seed);
  Eigen::VectorXd w, beta;
  draw_coef_pair(stream, cfg.p, cfg.alpha_t, cfg.alpha_s, cfg.rho, w, beta);
  return {std::move(w), std::move(beta)};
}

Eigen::MatrixXd draw_sources_sharing_beta(rng::Stream& stream, const Eigen::VectorXd& beta,
                                          double alpha_t, double alpha_s,
                                          const std::vector<double>& rhos) {
  const Eigen::Index p = beta.size();
  Eigen::MatrixXd sources(static_cast<Eigen::Index>(rhos.size()), p);
  const double scale = alpha_s / std::sqrt(static_cast<double>(p));
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    const double rho = rhos[k];
    if (!(rho >= -1.0 && rho <= 1.0)) throw parameter_error("rho must lie in [-1, 1]");
    const double ortho = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (Eigen::Index j = 0; j < p; ++j)
      sources(static_cast<Eigen::Index>(k), j) =
          rho * (alpha_s / alpha_t) * beta[j] + scale * ortho * stream.normal();
  }
  return sources;
}

Eigen::MatrixXd draw_design(rng::Stream& stream, int n, int p, DesignCovariance cov, double corr) {
  if (n < 1 || p < 1) throw parameter_error("design dimensions must be positive");
  Eigen::MatrixXd x(n, p);
  if (cov == DesignCovariance::identity) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = stream.normal();
    return x;
  }
  if (!(corr >= 0.0 && corr < 1.0))
    throw parameter_error("exchangeable correlation must lie in [0, 1), got " +
                          std::to_string(corr));
  const double shared = std::sqrt(corr), own = std::sqrt(1.0 - corr);
  for (int i = 0; i < n; ++i) {
    const double g = stream.normal();
    for (int j = 0; j < p; ++j) x(i, j) = shared * g + own * stream.normal();
  }
  return x;
}

Eigen::MatrixXd gen_design(int n, int p, DesignCovariance cov, double corr, std::uint64_t seed) {
  rng::Stream stream(seed);
  return draw_design(stream, n, p, cov, corr);
}

Eigen::VectorXd draw_response(rng::Stream& stream, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& beta, double sigma_sq) {
  if (X.cols() != beta.size()) throw shape_error("design and coefficient dimensions differ");
  if (sigma_sq < 0.0) throw parameter_error("sigma_sq must be nonnegative");
  Eigen::VectorXd y = X * beta;
  if (sigma_sq > 0.0) {
    const double sd = std::sqrt(sigma_sq);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sd * stream.normal();
  }
  return y;
}

Eigen::VectorXd gen_response(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                             double sigma_sq, std::uint64_t seed) {
  rng::Stream stream(seed);
  return draw_response(stream, X, beta, sigma_sq);
}

SourceNoiseModel build_noise_model(const NoiseConfig& cfg, int p) {
  if (p < 1) throw parameter_error("noise dimension must be positive");
  SourceNoiseModel model;
  if (cfg.structure == NoiseConfig::Structure::none) {
    model.none = true;
    model.scales = Eigen::VectorXd::Zero(p);
    return model;
  }
  if (!(cfg.correlation >= 0.0 && cfg.correlation < 1.0))
    throw parameter_error("exchangeable correlation must lie in [0, 1)");
  if (cfg.var_low < 0.0 || cfg.var_high < cfg.var_low)
    throw parameter_error("variance range must satisfy 0 <= low <= high");

  rng::Stream stream(cfg.seed);
  Eigen::VectorXd variances(p);
  for (int j = 0; j < p; ++j) variances[j] = stream.uniform(cfg.var_low, cfg.var_high);
  model.scales = variances.cwiseSqrt();
  model.correlation = cfg.correlation;

  // Sampling covariance D^1/2 R D^1/2; the asymptotic convention carries a
  // 1/p, so the risk-bracket endpoints are p times its eigenvalue range.
  Eigen::MatrixXd cov = model.scales * model.scales.transpose();
  cov *= cfg.correlation;
  cov.diagonal() = variances;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numeric_error("noise covariance eigensolve failed");
  const double floor = es.eigenvalues().minCoeff();
  if (floor < -1e-10) throw numeric_error("constructed noise covariance is not PSD");
  model.c_lower = static_cast<double>(p) * std::max(0.0, floor);
  model.c_upper = static_cast<double>(p) * es.eigenvalues().maxCoeff();
  return model;
}

Eigen::VectorXd SourceNoiseModel::sample(rng::Stream& stream) const {
  const Eigen::Index p = scales.size();
  if (none) return Eigen::VectorXd::Zero(p);
  const double shared = std::sqrt(correlation), own = std::sqrt(1.0 - correlation);
  const double g = stream.normal();
  Eigen::VectorXd delta(p);
  for (Eigen::Index j = 0; j < p; ++j)
    delta[j] = scales[j] * (shared * g + own * stream.normal());
  return delta;
}

SourceEstimate gen_source_estimate(const Eigen::VectorXd& w, const SourceNoiseModel& noise,
                                   std::uint64_t seed) {
  if (w.size() != noise.scales.size())
    throw shape_error("noise model dimension does not match coefficient length");
  rng::Stream stream(seed);
  return SourceEstimate(w + noise.sample(stream));
}

SourceEstimate ols_source_estimate(const Dataset& source_data) {
  const Eigen::Index p = source_data.p();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(source_data.X.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram.selfadjointView<Eigen::Lower>());
  if (es.info() != Eigen::Success) throw numeric_error("source Gram eigensolve failed");
  const double tol = static_cast<double>(p) * 1e-14 * es.eigenvalues().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > tol))
    throw numeric_error("source Gram matrix is singular; fit the source with a ridge penalty");
  const Eigen::VectorXd rhs = es.eigenvectors().transpose() * (source_data.X.transpose() * source_data.Y);
  return SourceEstimate(es.eigenvectors() * (rhs.array() / es.eigenvalues().array()).matrix());
}

int ExperimentSpec::effective_replicates() const {
  if (replicates > 0) return replicates;
  if (scale == Scale::desk) return 100;
  switch (figure) {
    case Figure::fig2_noiseless_risk:
    case Figure::fig3_bounded_risk:
      return 500;
    case Figure::fig4_single_source:
      return 200;
    case Figure::fig5_multi_source:
      return 1000;
  }
  return 100;
}

std::string ExperimentSpec::figure_prefix() const {
  switch (figure) {
    case Figure::fig2_noiseless_risk:
      return "fig2";
    case Figure::fig3_bounded_risk:
      return "fig3";
    case Figure::fig4_single_source:
      return "fig4";
    case Figure::fig5_multi_source:
      return "fig5";
  }
  return "fig";
}

namespace {

std::uint64_t figure_id(ExperimentSpec::Figure f) {
  switch (f) {
    case ExperimentSpec::Figure::fig2_noiseless_risk:
      return 2;
    case ExperimentSpec::Figure::fig3_bounded_risk:
      return 3;
    case ExperimentSpec::Figure::fig4_single_source:
      return 4;
    case ExperimentSpec::Figure::fig5_multi_source:
      return 5;
  }
  return 0;
}

std::vector<std::array<double, 3>> default_panels() {
  // (rho, alpha_t/alpha_s, gamma); the two published rows
  std::vector<std::array<double, 3>> panels;
  for (int row : {0, 1}) {
    const double ratio = row == 0 ? 10.0 / 9.0 : 2.0;
    const double gamma = row == 0 ? 2.0 : 0.5;
    for (double rho : {0.3, 0.6, 0.9}) panels.push_back({rho, ratio, gamma});
  }
  return panels;
}

std::vector<double> lambda_grid(const ExperimentSpec& spec) {
  if (spec.lambda_count < 2) throw parameter_error("lambda grid needs at least 2 points");
  std::vector<double> lams(spec.lambda_count);
  for (int i = 0; i < spec.lambda_count; ++i) {
    const double s = spec.sqrt_lambda_min + (spec.sqrt_lambda_max - spec.sqrt_lambda_min) * i /
                                                (spec.lambda_count - 1);
    lams[i] = s * s;
  }
  return lams;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  const double n = static_cast<double>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

const char* const kCurveMethods[3] = {"target_only", "distTL", "angleTL"};

// fig2 and fig3 share the replicate body; fig2 is the noiseless special case.
SimulationResult run_curve_figure(const ExperimentSpec& spec, int threads) {
  const bool noiseless = spec.figure == ExperimentSpec::Figure::fig2_noiseless_risk;
  const auto panels = spec.panels.empty() ? default_panels() : spec.panels;
  const std::vector<double> lambdas = lambda_grid(spec);
  const int reps = spec.effective_replicates();
  const int n = 50, n_test = 100;
  const double alpha_t = 1.0;
  const int n_lambda = static_cast<int>(lambdas.size());
  const std::uint64_t fig = figure_id(spec.figure);

  struct PanelSetup {
    int p = 0;
    double alpha_s = 0.0;
    SourceNoiseModel noise;
    double eta_slope = 0.0;  // angleTL eta = eta_slope * lambda
  };
  std::vector<PanelSetup> setups(panels.size());
  for (std::size_t g = 0; g < panels.size(); ++g) {
    const auto [rho, ratio, gamma] = panels[g];
    PanelSetup& setup = setups[g];
    setup.p = static_cast<int>(std::lround(gamma * n));
    setup.alpha_s = alpha_t / ratio;
    if (noiseless) {
      NoiseConfig off;
      off.structure = NoiseConfig::Structure::none;
      setup.noise = build_noise_model(off, setup.p);
      // per-lambda optimal eta in the exact case
      setup.eta_slope = rho * alpha_t / setup.alpha_s;
    } else {
      NoiseConfig cfg;
      cfg.seed = rng::mix_seed({spec.master_seed, fig, static_cast<std::uint64_t>(g), kPanelSetupTag});
      setup.noise = build_noise_model(cfg, setup.p);
      // eta tuned against the worst admissible error level; this choice
      // keeps the upper risk curve below the plain-ridge curve
      setup.eta_slope = rho * alpha_t * setup.alpha_s /
                        (setup.alpha_s * setup.alpha_s + setup.noise.c_upper);
    }
  }

  // replicate-major buffer, reduced in fixed order afterwards
  const std::size_t per_rep = static_cast<std::size_t>(n_lambda) * 3;
  std::vector<std::vector<double>> buffer(panels.size() * reps);

  parallel_for(static_cast<std::int64_t>(buffer.size()), threads, [&](std::int64_t job) {
    const std::size_t g = static_cast<std::size_t>(job) / reps;
    const std::uint64_t r = static_cast<std::uint64_t>(job) % reps;
    const auto [rho, ratio, gamma] = panels[g];
    const PanelSetup& setup = setups[g];
    rng::Stream stream(rng::mix_seed({spec.master_seed, fig, static_cast<std::uint64_t>(g), r}));

    Eigen::VectorXd w, beta;
    draw_coef_pair(stream, setup.p, alpha_t, setup.alpha_s, rho, w, beta);
    const Eigen::VectorXd w_hat = noiseless ? w : Eigen::VectorXd(w + setup.noise.sample(stream));
    const Eigen::MatrixXd x = draw_design(stream, n, setup.p, DesignCovariance::identity, 0.0);
    const Eigen::VectorXd y = draw_response(stream, x, beta, sigma_noise);
    const Eigen::MatrixXd x_test =
        draw_design(stream, n_test, setup.p, DesignCovariance::identity, 0.0);
    const Eigen::VectorXd y_test = draw_response(stream, x_test, beta, sigma_noise);

    const RidgeSweep sweep(x, y, w_hat);
    const RidgeSweep::TestCache cache = sweep.make_test_cache(x_test);

    std::vector<double>& slot = buffer[static_cast<std::size_t>(job)];
    slot.resize(per_rep);
    for (int i = 0; i < n_lambda; ++i) {
      const double lam = lambdas[static_cast<std::size_t>(i)];
      const double etas[3] = {0.0, lam, setup.eta_slope * lam};
      for (int m = 0; m < 3; ++m) {
        const Eigen::VectorXd pred = sweep.predict(cache, lam, etas[m]);
        slot[static_cast<std::size_t>(i) * 3 + m] =
            (pred - y_test).squaredNorm() / static_cast<double>(n_test);
      }
    }
  });

  SimulationResult result;
  result.spec = spec;
  const SpectralDistribution identity = SpectralDistribution::identity();
  std::vector<double> values(reps);
  for (std::size_t g = 0; g < panels.size(); ++g) {
    const auto [rho, ratio, gamma] = panels[g];
    const PanelSetup& setup = setups[g];
    const double alpha_s_sq = setup.alpha_s * setup.alpha_s;
    const double signal = 1.0 - rho * rho * alpha_s_sq / (alpha_s_sq + setup.noise.c_upper);
    const double lambda_star = gamma * sigma_noise / (alpha_t * alpha_t * signal);
    for (int i = 0; i < n_lambda; ++i) {
      const double lam = lambdas[static_cast<std::size_t>(i)];
      const double etas[3] = {0.0, lam, setup.eta_slope * lam};
      for (int m = 0; m < 3; ++m) {
        for (int r = 0; r < reps; ++r)
          values[static_cast<std::size_t>(r)] =
              buffer[g * reps + static_cast<std::size_t>(r)][static_cast<std::size_t>(i) * 3 + m];
        const MeanSe stats = mean_se(values);
        CurveRow row;
        row.rho = rho;
        row.alpha_ratio = ratio;
        row.gamma = gamma;
        row.n = n;
        row.p = setup.p;
        row.lambda_index = i;
        row.lambda = lam;
        row.method = kCurveMethods[m];
        row.emp_mean = stats.mean;
        row.emp_se = stats.se;
        row.lambda_star = lambda_star;
        row.c_lower = setup.noise.c_lower;
        row.c_upper = setup.noise.c_upper;
        row.theory_lower = risk_value(identity, gamma, alpha_t * alpha_t, alpha_s_sq, rho,
                                      sigma_noise, setup.noise.c_lower, lam, etas[m]);
        row.theory_upper = risk_value(identity, gamma, alpha_t * alpha_t, alpha_s_sq, rho,
                                      sigma_noise, setup.noise.c_upper, lam, etas[m]);
        row.theory = noiseless ? row.theory_lower : 0.5 * (row.theory_lower + row.theory_upper);
        result.curves.push_back(std::move(row));
      }
    }
  }
  return result;
}

struct CvChoice {
  PenaltyConfig angle;
  PenaltyConfig dist;
  PenaltyConfig target;
};

// One grid evaluation gives all three tuned methods; the restricted lines
// are subsets of the full grid.
CvChoice tuned_choices(const CvResult& cv, const TuneGrid& grid) {
  const std::vector<double> ratios = grid.active_ratios();
  auto better = [](const CvPoint& a, const CvPoint& b) {
    if (a.cv_mse != b.cv_mse) return a.cv_mse < b.cv_mse;
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    if (std::abs(a.eta) != std::abs(b.eta)) return std::abs(a.eta) < std::abs(b.eta);
    return a.eta > b.eta;
  };
  CvChoice choice;
  choice.angle = cv.best;
  long best_dist = -1, best_target = -1;
  for (std::size_t pt = 0; pt < cv.surface.size(); ++pt) {
    const double ratio = ratios[pt % ratios.size()];
    if (ratio == 1.0 &&
        (best_dist < 0 || better(cv.surface[pt], cv.surface[static_cast<std::size_t>(best_dist)])))
      best_dist = static_cast<long>(pt);
    if (ratio == 0.0 && (best_target < 0 ||
                         better(cv.surface[pt], cv.surface[static_cast<std::size_t>(best_target)])))
      best_target = static_cast<long>(pt);
  }
  if (best_dist < 0 || best_target < 0)
    throw parameter_error("tuning grid is missing the ratio-0 or ratio-1 benchmark line");
  choice.dist = {cv.surface[static_cast<std::size_t>(best_dist)].lambda,
                 cv.surface[static_cast<std::size_t>(best_dist)].eta};
  choice.target = {cv.surface[static_cast<std::size_t>(best_target)].lambda,
                   cv.surface[static_cast<std::size_t>(best_target)].eta};
  return choice;
}

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(truth.size()));
}

Dataset take_rows(const Dataset& data, const std::vector<int>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), data.p());
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data.X.row(rows[i]);
    y[static_cast<Eigen::Index>(i)] = data.Y[rows[i]];
  }
  return Dataset(std::move(x), std::move(y));
}

SimulationResult run_fig4(const ExperimentSpec& spec, int threads) {
  const std::vector<double> rhos =
      spec.rhos.empty() ? std::vector<double>{0.3, 0.5, 0.7, 0.9, 0.95} : spec.rhos;
  const std::vector<int> dims = spec.dims.empty() ? std::vector<int>{25, 50, 100} : spec.dims;
  const std::vector<double> ratios =
      spec.ratios.empty() ? std::vector<double>{0.5, 1.0, 2.0} : spec.ratios;
  const int reps = spec.effective_replicates();
  const int n = 50, n_source = 5000, n_test = 200;
  const double alpha_t = 1.0;
  const std::uint64_t fig = figure_id(spec.figure);
  const TuneGrid grid = TuneGrid::defaults(TuneGrid::Mode::angle);
  const CvPlan plan_template{3, 0};

  struct Cell {
    double rho, ratio;
    int p;
  };
  std::vector<Cell> cells;
  for (int p : dims)
    for (double ratio : ratios)
      for (double rho : rhos) cells.push_back({rho, ratio, p});

  constexpr int kMethods = 4;  // target_only, source_only, distTL, angleTL
  std::vector<std::array<double, kMethods>> buffer(cells.size() * reps);

  parallel_for(static_cast<std::int64_t>(buffer.size()), threads, [&](std::int64_t job) {
    const std::size_t g = static_cast<std::size_t>(job) / reps;
    const std::uint64_t r = static_cast<std::uint64_t>(job) % reps;
    const Cell& cell = cells[g];
    const double alpha_s = alpha_t / cell.ratio;
    rng::Stream stream(rng::mix_seed({spec.master_seed, fig, static_cast<std::uint64_t>(g), r}));

    Eigen::VectorXd w, beta;
    draw_coef_pair(stream, cell.p, alpha_t, alpha_s, cell.rho, w, beta);
    const Eigen::MatrixXd x_src =
        draw_design(stream, n_source, cell.p, DesignCovariance::exchangeable, 0.2);
    const Eigen::VectorXd y_src = draw_response(stream, x_src, w, sigma_noise);
    const SourceEstimate w_hat = ols_source_estimate(Dataset(x_src, y_src));

    const Eigen::MatrixXd x = draw_design(stream, n, cell.p, DesignCovariance::exchangeable, 0.1);
    const Eigen::VectorXd y = draw_response(stream, x, beta, sigma_noise);
    const Eigen::MatrixXd x_test =
        draw_design(stream, n_test, cell.p, DesignCovariance::exchangeable, 0.1);
    const Eigen::VectorXd y_test = draw_response(stream, x_test, beta, sigma_noise);
    const Dataset target(x, y);

    CvPlan plan = plan_template;
    plan.seed = stream.next_bits();
    const CvResult cv = cross_validate(target, w_hat, grid, plan);
    const CvChoice choice = tuned_choices(cv, grid);

    auto& slot = buffer[static_cast<std::size_t>(job)];
    slot[0] = rmse(x_test * refit_best(target, w_hat, choice.target).beta_hat, y_test);
    slot[1] = rmse(x_test * w_hat.w_hat, y_test);
    slot[2] = rmse(x_test * refit_best(target, w_hat, choice.dist).beta_hat, y_test);
    slot[3] = rmse(x_test * refit_best(target, w_hat, choice.angle).beta_hat, y_test);
  });

  static const char* const names[kMethods] = {"target_only", "source_only", "distTL", "angleTL"};
  SimulationResult result;
  result.spec = spec;
  std::vector<double> values(reps);
  for (std::size_t g = 0; g < cells.size(); ++g) {
    for (int m = 0; m < kMethods; ++m) {
      for (int r = 0; r < reps; ++r)
        values[static_cast<std::size_t>(r)] = buffer[g * reps + static_cast<std::size_t>(r)][m];
      const MeanSe stats = mean_se(values);
      RmseRow row;
      row.rho = cells[g].rho;
      row.p = cells[g].p;
      row.alpha_ratio = cells[g].ratio;
      row.method = names[m];
      row.rmse_mean = stats.mean;
      row.rmse_se = stats.se;
      row.replicates = reps;
      result.rmse.push_back(std::move(row));
    }
  }
  return result;
}

SimulationResult run_fig5(const ExperimentSpec& spec, int threads) {
  const std::vector<std::vector<double>> configs =
      spec.source_rho_configs.empty()
          ? std::vector<std::vector<double>>{{0.4, 0.45, 0.5, 0.55, 0.6},
                                             {0.1, 0.3, 0.5, 0.7, 0.9}}
          : spec.source_rho_configs;
  const int reps = spec.effective_replicates();
  const int n = 100, n_source = 5000, n_test = 200;
  const int p = spec.dims.empty() ? 200 : spec.dims[0];
  const double alpha_t = 1.0;
  const double alpha_s = alpha_t / (spec.ratios.empty() ? 2.0 : spec.ratios[0]);
  const std::uint64_t fig = figure_id(spec.figure);
  const TuneGrid grid = TuneGrid::defaults(TuneGrid::Mode::angle);

  constexpr int kMethods = 4;  // target_only, angleTL best single, multi1, multi2
  std::vector<std::array<double, kMethods>> buffer(configs.size() * reps);

  parallel_for(static_cast<std::int64_t>(buffer.size()), threads, [&](std::int64_t job) {
    const std::size_t g = static_cast<std::size_t>(job) / reps;
    const std::uint64_t r = static_cast<std::uint64_t>(job) % reps;
    const std::vector<double>& rhos = configs[g];
    rng::Stream stream(rng::mix_seed({spec.master_seed, fig, static_cast<std::uint64_t>(g), r}));

    Eigen::VectorXd beta;
    {
      Eigen::VectorXd w_tmp;
      // beta alone from the bivariate draw machinery: rho=0 keeps it
      // independent of the throwaway first column
      draw_coef_pair(stream, p, alpha_t, alpha_s, 0.0, w_tmp, beta);
    }
    const Eigen::MatrixXd w_true = draw_sources_sharing_beta(stream, beta, alpha_t, alpha_s, rhos);

    std::vector<SourceEstimate> estimates;
    estimates.reserve(rhos.size());
    for (std::size_t k = 0; k < rhos.size(); ++k) {
      const Eigen::MatrixXd x_src =
          draw_design(stream, n_source, p, DesignCovariance::exchangeable, 0.2);
      const Eigen::VectorXd w_k = w_true.row(static_cast<Eigen::Index>(k)).transpose();
      const Eigen::VectorXd y_src = draw_response(stream, x_src, w_k, sigma_noise);
      estimates.push_back(ols_source_estimate(Dataset(x_src, y_src)));
    }
    const SourceBundle bundle(estimates);

    const Eigen::MatrixXd x = draw_design(stream, n, p, DesignCovariance::exchangeable, 0.1);
    const Eigen::VectorXd y = draw_response(stream, x, beta, sigma_noise);
    const Eigen::MatrixXd x_test =
        draw_design(stream, n_test, p, DesignCovariance::exchangeable, 0.1);
    const Eigen::VectorXd y_test = draw_response(stream, x_test, beta, sigma_noise);
    const Dataset target(x, y);

    const std::uint64_t cv_seed = stream.next_bits();
    // 30% of the target rows, taken from the front of a stream shuffle,
    // are reserved for the validation-weighted aggregation
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    stream.shuffle(order);
    const int n_reserved = static_cast<int>(std::lround(0.3 * n));
    const std::vector<int> reserved(order.begin(), order.begin() + n_reserved);
    const std::vector<int> remaining(order.begin() + n_reserved, order.end());

    const CvPlan plan{3, cv_seed};
    const std::size_t best_single =
        static_cast<std::size_t>(std::max_element(rhos.begin(), rhos.end()) - rhos.begin());

    // target-only and best-single share one grid evaluation
    const CvResult cv_single = cross_validate(target, bundle.estimates[best_single], grid, plan);
    const CvChoice single_choice = tuned_choices(cv_single, grid);

    const AggregationResult multi2 = aggregate_spectral(bundle);
    const SourceEstimate w_multi2(multi2.w_agg);
    const CvResult cv_multi2 = cross_validate(target, w_multi2, grid, plan);

    const AggregationResult multi1 = aggregate_validation(bundle, take_rows(target, reserved));
    const SourceEstimate w_multi1(multi1.w_agg);
    const CvResult cv_multi1 = cross_validate(take_rows(target, remaining), w_multi1, grid, plan);

    auto& slot = buffer[static_cast<std::size_t>(job)];
    slot[0] = rmse(x_test * refit_best(target, bundle.estimates[best_single],
                                       single_choice.target).beta_hat, y_test);
    slot[1] = rmse(x_test * refit_best(target, bundle.estimates[best_single],
                                       single_choice.angle).beta_hat, y_test);
    slot[2] = rmse(x_test * refit_best(target, w_multi1, cv_multi1.best).beta_hat, y_test);
    slot[3] = rmse(x_test * refit_best(target, w_multi2, cv_multi2.best).beta_hat, y_test);
  });

  static const char* const names[kMethods] = {"target_only", "angleTL", "angleTL_multi1",
                                              "angleTL_multi2"};
  SimulationResult result;
  result.spec = spec;
  std::vector<double> values(reps);
  for (std::size_t g = 0; g < configs.size(); ++g) {
    std::string label;
    for (std::size_t k = 0; k < configs[g].size(); ++k) {
      if (k) label += '-';
      label += format_full(configs[g][k]);
    }
    for (int m = 0; m < kMethods; ++m) {
      for (int r = 0; r < reps; ++r)
        values[static_cast<std::size_t>(r)] = buffer[g * reps + static_cast<std::size_t>(r)][m];
      const MeanSe stats = mean_se(values);
      RmseRow row;
      row.rho = std::numeric_limits<double>::quiet_NaN();
      row.p = p;
      row.alpha_ratio = alpha_t / alpha_s;
      row.config = label;
      row.method = names[m];
      row.rmse_mean = stats.mean;
      row.rmse_se = stats.se;
      row.replicates = reps;
      result.rmse.push_back(std::move(row));
    }
  }
  return result;
}

}  // namespace

SimulationResult run_experiment(const ExperimentSpec& spec, int threads) {
  switch (spec.figure) {
    case ExperimentSpec::Figure::fig2_noiseless_risk:
    case ExperimentSpec::Figure::fig3_bounded_risk:
      return run_curve_figure(spec, threads);
    case ExperimentSpec::Figure::fig4_single_source:
      return run_fig4(spec, threads);
    case ExperimentSpec::Figure::fig5_multi_source:
      return run_fig5(spec, threads);
  }
  throw parameter_error("unknown experiment figure");
}

namespace {

ExperimentSpec::Figure figure_from_name(const std::string& name) {
  if (name == "fig2_noiseless_risk") return ExperimentSpec::Figure::fig2_noiseless_risk;
  if (name == "fig3_bounded_risk") return ExperimentSpec::Figure::fig3_bounded_risk;
  if (name == "fig4_single_source") return ExperimentSpec::Figure::fig4_single_source;
  if (name == "fig5_multi_source") return ExperimentSpec::Figure::fig5_multi_source;
  throw parameter_error("unknown figure id '" + name + "'");
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("experiment spec JSON: ") + e.what());
  }
  ExperimentSpec spec;
  try {
    spec.figure = figure_from_name(j.at("figure").get<std::string>());
    if (j.contains("scale")) {
      const std::string s = j["scale"].get<std::string>();
      if (s == "desk")
        spec.scale = Scale::desk;
      else if (s == "paper")
        spec.scale = Scale::paper;
      else
        throw parameter_error("scale must be 'desk' or 'paper'");
    }
    spec.replicates = j.value("replicates", 0);
    spec.master_seed = j.value("master_seed", spec.master_seed);
    if (j.contains("panels"))
      for (const auto& panel : j["panels"])
        spec.panels.push_back({panel.at(0).get<double>(), panel.at(1).get<double>(),
                               panel.at(2).get<double>()});
    if (j.contains("lambda_grid")) {
      const auto& lg = j["lambda_grid"];
      spec.lambda_count = lg.value("count", spec.lambda_count);
      spec.sqrt_lambda_min = lg.value("sqrt_min", spec.sqrt_lambda_min);
      spec.sqrt_lambda_max = lg.value("sqrt_max", spec.sqrt_lambda_max);
    }
    if (j.contains("rhos")) spec.rhos = j["rhos"].get<std::vector<double>>();
    if (j.contains("dims")) spec.dims = j["dims"].get<std::vector<int>>();
    if (j.contains("ratios")) spec.ratios = j["ratios"].get<std::vector<double>>();
    if (j.contains("source_rho_configs"))
      spec.source_rho_configs = j["source_rho_configs"].get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("experiment spec JSON: ") + e.what());
  }
  return spec;
}

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

void write_results(const SimulationResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string prefix = result.spec.figure_prefix();
  const fs::path csv_path = fs::path(out_dir) / (prefix + "_results.csv");
  std::ofstream out(csv_path);
  if (!out) throw io_error("cannot open '" + csv_path.string() + "' for writing");

  const bool curve = !result.curves.empty() || result.rmse.empty();
  if (curve) {
    const bool noiseless = result.spec.figure == ExperimentSpec::Figure::fig2_noiseless_risk;
    out << "rho,alpha_ratio,gamma,n,p,lambda_index,lambda,method,emp_mean,emp_se";
    out << (noiseless ? ",theory" : ",theory_lower,theory_upper,c_lower,c_upper");
    out << ",lambda_star\n";
    for (const CurveRow& row : result.curves) {
      out << format_full(row.rho) << ',' << format_full(row.alpha_ratio) << ','
          << format_full(row.gamma) << ',' << row.n << ',' << row.p << ',' << row.lambda_index
          << ',' << format_full(row.lambda) << ',' << row.method << ','
          << format_full(row.emp_mean) << ',' << format_full(row.emp_se);
      if (noiseless)
        out << ',' << format_full(row.theory);
      else
        out << ',' << format_full(row.theory_lower) << ',' << format_full(row.theory_upper) << ','
            << format_full(row.c_lower) << ',' << format_full(row.c_upper);
      out << ',' << format_full(row.lambda_star) << '\n';
    }
  } else {
    const bool multi = result.spec.figure == ExperimentSpec::Figure::fig5_multi_source;
    out << (multi ? "config,p,method,rmse_mean,rmse_se,replicates\n"
                  : "rho,p,alpha_ratio,method,rmse_mean,rmse_se,replicates\n");
    for (const RmseRow& row : result.rmse) {
      if (multi)
        out << row.config << ',' << row.p;
      else
        out << format_full(row.rho) << ',' << row.p << ',' << format_full(row.alpha_ratio);
      out << ',' << row.method << ',' << format_full(row.rmse_mean) << ','
          << format_full(row.rmse_se) << ',' << row.replicates << '\n';
    }
  }
  if (!out) throw io_error("write to '" + csv_path.string() + "' failed");
  out.close();

  nlohmann::json manifest;
  manifest["figure"] = prefix;
  manifest["master_seed"] = result.spec.master_seed;
  manifest["replicates"] = result.spec.effective_replicates();
  manifest["scale"] = result.spec.scale == ExperimentSpec::Scale::desk ? "desk" : "paper";
  manifest["version"] = ANGLETL_VERSION;
  const auto now = std::chrono::system_clock::now();
  manifest["created_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  if (!mf) throw io_error("cannot write manifest.json");
  mf << manifest.dump(2) << '\n';
}

}  // namespace angletl
