#pragma once

#include <Eigen/Dense>

#include "angletl/types.hpp"

namespace angletl {

enum class SolvePath { automatic, primal, dual };

/// Eigendecomposition cache for the penalized ridge system. One O(min(n,p)^3)
/// factorization serves every (lambda, eta) pair afterwards, which is what
/// makes dense cross-validation grids cheap.
///
/// The fitted coefficients solve
///   (X'X + n*lambda*I) beta = X'Y + n*eta*w.
/// With p <= n the p x p Gram matrix is decomposed directly; with p > n the
/// n x n system is used through the matrix-inversion identity
///   beta = X'(XX' + n*lambda*I)^-1 Y + (eta/lambda) [w - X'(XX' + n*lambda*I)^-1 X w].
class RidgeSweep {
 public:
  RidgeSweep(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, const Eigen::VectorXd& w_hat,
             SolvePath path = SolvePath::automatic);

  Eigen::VectorXd coefficients(double lambda, double eta) const;

  /// Precomputed projections of a fixed evaluation matrix; predictions for
  /// any (lambda, eta) then cost O(rows * min(n, p)).
  struct TestCache {
    Eigen::MatrixXd proj;
    Eigen::VectorXd xw;
  };
  TestCache make_test_cache(const Eigen::MatrixXd& X_test) const;
  Eigen::VectorXd predict(const TestCache& cache, double lambda, double eta) const;

  bool uses_dual_path() const { return dual_; }
  Eigen::Index n() const { return n_; }
  Eigen::Index p() const { return p_; }

  /// Condition number of the regularized system actually solved.
  double condition_estimate(double lambda) const;

 private:
  Eigen::VectorXd mode_weights(double lambda, double eta) const;

  Eigen::Index n_ = 0, p_ = 0;
  bool dual_ = false;
  Eigen::VectorXd eigs_;   // eigenvalues of X'X (primal) or XX' (dual), clamped at 0
  Eigen::MatrixXd basis_;  // corresponding orthonormal eigenvectors
  Eigen::VectorXd qty_;    // basis' * X'Y (primal) or basis' * Y (dual)
  Eigen::VectorXd qtw_;    // basis' * w   (primal) or basis' * Xw (dual)
  Eigen::MatrixXd xt_u_;   // dual only: X' * basis, p x n
  Eigen::VectorXd w_;      // dual only: source estimate
};

/// Angle-penalized transfer fit: minimizes
///   (1/n)||Y - X beta||^2 + lambda ||beta||^2 - 2 eta w'beta.
/// lambda must be positive; eta may be any real.
FitResult fit_angle_tl(const Dataset& data, const SourceEstimate& source, const PenaltyConfig& cfg,
                       SolvePath path = SolvePath::automatic);

/// Plain ridge regression on the target data (eta = 0 case).
FitResult fit_target_only(const Dataset& data, double lambda);

/// Distance-penalized transfer fit, the eta = lambda case; equivalently the
/// minimizer of (1/n)||Y - X beta||^2 + lambda ||beta - w||^2.
FitResult fit_dist_tl(const Dataset& data, const SourceEstimate& source, double lambda);

/// Least-squares rescaling of the source direction: c = (Xw)'Y / ||Xw||^2,
/// returned as c*w with lambda = 0 and the eta sentinel.
FitResult rescale_source(const Dataset& data, const SourceEstimate& source);

/// Linear predictions X_new * beta.
Eigen::VectorXd predict(const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& X_new);

/// Value of the penalized objective at beta.
double angle_objective(const Dataset& data, const Eigen::VectorXd& w_hat, double lambda, double eta,
                       const Eigen::VectorXd& beta);

/// Gradient of the penalized objective at beta:
///   (2/n) X'(X beta - Y) + 2 lambda beta - 2 eta w.
Eigen::VectorXd angle_objective_gradient(const Dataset& data, const Eigen::VectorXd& w_hat,
                                         double lambda, double eta, const Eigen::VectorXd& beta);

}  // namespace angletl
