#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "angletl/errors.hpp"

namespace angletl {

#define ANGLETL_VERSION "0.1.0"

/// Target design matrix with paired response. Rows are samples.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;

  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y) : X(std::move(x)), Y(std::move(y)) {
    if (X.rows() < 1 || X.cols() < 1)
      throw shape_error("Dataset requires at least one row and one column, got " +
                        std::to_string(X.rows()) + "x" + std::to_string(X.cols()));
    if (Y.size() != X.rows())
      throw shape_error("response length " + std::to_string(Y.size()) +
                        " does not match sample count " + std::to_string(X.rows()));
    if (!X.allFinite() || !Y.allFinite())
      throw domain_error("Dataset contains non-finite entries");
  }

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// Fitted coefficient vector from an external source model.
struct SourceEstimate {
  Eigen::VectorXd w_hat;
  std::string label;

  explicit SourceEstimate(Eigen::VectorXd w, std::string name = {})
      : w_hat(std::move(w)), label(std::move(name)) {
    if (w_hat.size() < 1) throw shape_error("source estimate is empty");
    if (!w_hat.allFinite()) throw domain_error("source estimate contains non-finite entries");
  }
};

/// Ridge strength lambda and concordance-penalty strength eta.
/// eta = 0 recovers the target-only ridge fit, eta = lambda the
/// distance-penalized fit.
struct PenaltyConfig {
  double lambda = 1.0;
  double eta = 0.0;
};

/// Output of a fit: coefficients, the penalties used, and the value of
/// the penalized objective at the solution.
///
/// rescale_source reports lambda = 0 and eta = NaN (the sentinel for
/// "not applicable"); its objective_value is the plain mean squared
/// residual.
struct FitResult {
  Eigen::VectorXd beta_hat;
  double lambda = 0.0;
  double eta = 0.0;
  double objective_value = 0.0;

  static double eta_not_applicable() { return std::numeric_limits<double>::quiet_NaN(); }
};

/// Discrete probability measure over population covariance eigenvalues.
struct SpectralDistribution {
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd weights;

  SpectralDistribution(Eigen::VectorXd eigs, Eigen::VectorXd w)
      : eigenvalues(std::move(eigs)), weights(std::move(w)) {
    if (eigenvalues.size() != weights.size() || eigenvalues.size() < 1)
      throw shape_error("spectrum needs matching non-empty eigenvalue and weight vectors");
    if ((eigenvalues.array() < 0.0).any())
      throw parameter_error("spectrum eigenvalues must be nonnegative");
    if ((weights.array() < 0.0).any())
      throw parameter_error("spectrum weights must be nonnegative");
    if (std::abs(weights.sum() - 1.0) > 1e-12)
      throw parameter_error("spectrum weights must sum to 1 within 1e-12, got sum " +
                            std::to_string(weights.sum()));
  }

  static SpectralDistribution point_mass(double t) {
    return SpectralDistribution(Eigen::VectorXd::Constant(1, t), Eigen::VectorXd::Constant(1, 1.0));
  }
  static SpectralDistribution identity() { return point_mass(1.0); }
  static SpectralDistribution two_point(double t1, double t2, double weight1 = 0.5) {
    Eigen::VectorXd e(2), w(2);
    e << t1, t2;
    w << weight1, 1.0 - weight1;
    return SpectralDistribution(std::move(e), std::move(w));
  }

  double max_eigenvalue() const { return eigenvalues.maxCoeff(); }
  double min_eigenvalue() const { return eigenvalues.minCoeff(); }
  /// First moment, the limit of tr(Sigma)/p.
  double mean() const { return eigenvalues.dot(weights); }
};

/// Checks that X, Y and w_hat have mutually consistent dimensions.
inline void validate_pairing(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                             const Eigen::VectorXd& w_hat) {
  if (Y.size() != X.rows())
    throw shape_error("rows(X) = " + std::to_string(X.rows()) + " but len(Y) = " +
                      std::to_string(Y.size()));
  if (w_hat.size() != X.cols())
    throw shape_error("cols(X) = " + std::to_string(X.cols()) + " but len(w_hat) = " +
                      std::to_string(w_hat.size()));
}

inline double cosine_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw domain_error("cosine angle undefined for zero vector");
  return a.dot(b) / (na * nb);
}

}  // namespace angletl
