#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "angletl/rng.hpp"
#include "angletl/types.hpp"

namespace angletl {

/// Joint law of one coefficient pair: p i.i.d. bivariate normal rows with
/// Var(w_j) = alpha_s^2/p, Var(beta_j) = alpha_t^2/p and correlation rho.
struct CoefPairConfig {
  int p = 0;
  double alpha_t = 1.0;
  double alpha_s = 1.0;
  double rho = 0.0;
  std::uint64_t seed = 0;
};

/// Returns (w, beta).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gen_coef_pair(const CoefPairConfig& cfg);
void draw_coef_pair(rng::Stream& stream, int p, double alpha_t, double alpha_s, double rho,
                    Eigen::VectorXd& w, Eigen::VectorXd& beta);

/// Sources sharing the target's coefficient factor: w_k has per-coordinate
/// correlation rho_k with beta and the w_k are conditionally independent
/// given beta. Returns a K x p matrix of source coefficients.
Eigen::MatrixXd draw_sources_sharing_beta(rng::Stream& stream, const Eigen::VectorXd& beta,
                                          double alpha_t, double alpha_s,
                                          const std::vector<double>& rhos);

enum class DesignCovariance { identity, exchangeable };

/// Gaussian design with unit variances; exchangeable rows are generated
/// through the one-factor form sqrt(c) g_i + sqrt(1-c) z_ij, which is exact
/// for this structure and O(np).
Eigen::MatrixXd gen_design(int n, int p, DesignCovariance cov, double corr, std::uint64_t seed);
Eigen::MatrixXd draw_design(rng::Stream& stream, int n, int p, DesignCovariance cov, double corr);

/// Y = X beta + N(0, sigma_sq I).
Eigen::VectorXd gen_response(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                             double sigma_sq, std::uint64_t seed);
Eigen::VectorXd draw_response(rng::Stream& stream, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& beta, double sigma_sq);

/// Source estimation-error law: exchangeable correlation with per-coordinate
/// variances drawn uniformly from [var_low, var_high].
struct NoiseConfig {
  enum class Structure { none, exchangeable };
  Structure structure = Structure::exchangeable;
  double correlation = 0.1;
  double var_low = 0.0;
  double var_high = 0.05;
  std::uint64_t seed = 0;
};

/// Frozen error covariance plus the matching risk-bracket endpoints. In the
/// asymptotic convention Cov(delta) = Sigma_delta / p, so the bracket
/// endpoints are p times the eigenvalue range of the sampling covariance.
struct SourceNoiseModel {
  Eigen::VectorXd scales;      // sqrt of per-coordinate variances
  double correlation = 0.0;
  double c_lower = 0.0;
  double c_upper = 0.0;
  bool none = false;

  Eigen::VectorXd sample(rng::Stream& stream) const;
};

SourceNoiseModel build_noise_model(const NoiseConfig& cfg, int p);

/// w + delta with delta drawn from the noise model.
SourceEstimate gen_source_estimate(const Eigen::VectorXd& w, const SourceNoiseModel& noise,
                                   std::uint64_t seed);

/// Ordinary least squares on source data; raises numeric_error when the
/// Gram matrix is singular (use a ridge fit for the source instead).
SourceEstimate ols_source_estimate(const Dataset& source_data);

struct ExperimentSpec {
  enum class Figure {
    fig2_noiseless_risk,
    fig3_bounded_risk,
    fig4_single_source,
    fig5_multi_source
  };
  enum class Scale { desk, paper };

  Figure figure = Figure::fig2_noiseless_risk;
  Scale scale = Scale::desk;
  int replicates = 0;  // 0 picks the scale default for the figure
  std::uint64_t master_seed = 20240801;

  // fig2/fig3: panels of (rho, alpha_t/alpha_s, gamma) and the lambda grid,
  // parameterized by sqrt(lambda)
  std::vector<std::array<double, 3>> panels;
  int lambda_count = 100;
  double sqrt_lambda_min = 0.1;
  double sqrt_lambda_max = 6.0;

  // fig4
  std::vector<double> rhos;
  std::vector<int> dims;
  std::vector<double> ratios;

  // fig5
  std::vector<std::vector<double>> source_rho_configs;

  int effective_replicates() const;
  std::string figure_prefix() const;  // "fig2" ... "fig5"

  static ExperimentSpec from_json_file(const std::string& path);
  static ExperimentSpec from_json_text(const std::string& text);
};

/// One output row of the risk-curve experiments (fig2, fig3).
struct CurveRow {
  double rho = 0.0, alpha_ratio = 0.0, gamma = 0.0;
  int n = 0, p = 0, lambda_index = 0;
  double lambda = 0.0;
  std::string method;
  double emp_mean = 0.0, emp_se = 0.0;
  double theory = 0.0;        // fig2 (exact noiseless value)
  double theory_lower = 0.0;  // fig3 bracket
  double theory_upper = 0.0;
  double lambda_star = 0.0;
  double c_lower = 0.0, c_upper = 0.0;
};

/// One output row of the RMSE experiments (fig4, fig5).
struct RmseRow {
  double rho = 0.0;  // fig4; unused for fig5
  int p = 0;
  double alpha_ratio = 0.0;
  std::string config;  // fig5 rho list
  std::string method;
  double rmse_mean = 0.0, rmse_se = 0.0;
  int replicates = 0;
};

struct SimulationResult {
  ExperimentSpec spec;
  std::vector<CurveRow> curves;
  std::vector<RmseRow> rmse;
};

/// Runs the experiment. Replicates are independent; their random streams
/// are hashed from (master_seed, figure, cell index, replicate index), so
/// the tables are identical for any thread count.
SimulationResult run_experiment(const ExperimentSpec& spec, int threads = 1);

/// Writes <prefix>_results.csv and manifest.json into out_dir.
void write_results(const SimulationResult& result, const std::string& out_dir);

}  // namespace angletl
