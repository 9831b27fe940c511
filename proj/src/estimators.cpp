#include "angletl/estimators.hpp"

#include <string>

#include "angletl/errors.hpp"

namespace angletl {

namespace {

constexpr double kConditionLimit = 1e14;

void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0))
    throw parameter_error("lambda must be positive, got " + std::to_string(lambda));
}

}  // namespace

RidgeSweep::RidgeSweep(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                       const Eigen::VectorXd& w_hat, SolvePath path) {
  validate_pairing(X, Y, w_hat);
  n_ = X.rows();
  p_ = X.cols();
  dual_ = (path == SolvePath::automatic) ? (p_ > n_) : (path == SolvePath::dual);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (!dual_) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p_, p_);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    es.compute(gram.selfadjointView<Eigen::Lower>());
    if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition of X'X failed");
    eigs_ = es.eigenvalues().cwiseMax(0.0);
    basis_ = es.eigenvectors();
    qty_ = basis_.transpose() * (X.transpose() * Y);
    qtw_ = basis_.transpose() * w_hat;
  } else {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_, n_);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X);
    es.compute(gram.selfadjointView<Eigen::Lower>());
    if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition of XX' failed");
    eigs_ = es.eigenvalues().cwiseMax(0.0);
    basis_ = es.eigenvectors();
    qty_ = basis_.transpose() * Y;
    qtw_ = basis_.transpose() * (X * w_hat);
    xt_u_ = X.transpose() * basis_;
    w_ = w_hat;
  }
}

double RidgeSweep::condition_estimate(double lambda) const {
  const double ridge = static_cast<double>(n_) * lambda;
  const double lo = (dual_ && p_ > n_) ? 0.0 : eigs_.minCoeff();
  return (eigs_.maxCoeff() + ridge) / (lo + ridge);
}

Eigen::VectorXd RidgeSweep::mode_weights(double lambda, double eta) const {
  const double nd = static_cast<double>(n_);
  if (!dual_)
    return (qty_.array() + nd * eta * qtw_.array()) / (eigs_.array() + nd * lambda);
  // dual: combined filter (uy - (eta/lambda) uxw) / (eigs + n lambda)
  return (qty_.array() - (eta / lambda) * qtw_.array()) / (eigs_.array() + nd * lambda);
}

Eigen::VectorXd RidgeSweep::coefficients(double lambda, double eta) const {
  require_positive_lambda(lambda);
  const Eigen::VectorXd z = mode_weights(lambda, eta);
  if (!dual_) return basis_ * z;
  Eigen::VectorXd beta = xt_u_ * z;
  if (eta != 0.0) beta += (eta / lambda) * w_;
  return beta;
}

RidgeSweep::TestCache RidgeSweep::make_test_cache(const Eigen::MatrixXd& X_test) const {
  if (X_test.cols() != p_)
    throw shape_error("evaluation matrix has " + std::to_string(X_test.cols()) +
                      " columns, expected " + std::to_string(p_));
  TestCache cache;
  cache.proj = dual_ ? Eigen::MatrixXd(X_test * xt_u_) : Eigen::MatrixXd(X_test * basis_);
  if (dual_) cache.xw = X_test * w_;
  return cache;
}

Eigen::VectorXd RidgeSweep::predict(const TestCache& cache, double lambda, double eta) const {
  require_positive_lambda(lambda);
  const Eigen::VectorXd z = mode_weights(lambda, eta);
  Eigen::VectorXd pred = cache.proj * z;
  if (dual_ && eta != 0.0) pred += (eta / lambda) * cache.xw;
  return pred;
}

namespace {

FitResult fit_impl(const Dataset& data, const Eigen::VectorXd& w_hat, double lambda, double eta,
                   SolvePath path) {
  require_positive_lambda(lambda);
  const RidgeSweep sweep(data.X, data.Y, w_hat, path);
  const double cond = sweep.condition_estimate(lambda);
  if (!(cond < kConditionLimit))
    throw numeric_error("regularized system is numerically singular (condition estimate " +
                        std::to_string(cond) + ")");
  FitResult result;
  result.beta_hat = sweep.coefficients(lambda, eta);
  result.lambda = lambda;
  result.eta = eta;
  result.objective_value = angle_objective(data, w_hat, lambda, eta, result.beta_hat);
  return result;
}

}  // namespace

FitResult fit_angle_tl(const Dataset& data, const SourceEstimate& source, const PenaltyConfig& cfg,
                       SolvePath path) {
  validate_pairing(data.X, data.Y, source.w_hat);
  return fit_impl(data, source.w_hat, cfg.lambda, cfg.eta, path);
}

FitResult fit_target_only(const Dataset& data, double lambda) {
  return fit_impl(data, Eigen::VectorXd::Zero(data.p()), lambda, 0.0, SolvePath::automatic);
}

FitResult fit_dist_tl(const Dataset& data, const SourceEstimate& source, double lambda) {
  validate_pairing(data.X, data.Y, source.w_hat);
  return fit_impl(data, source.w_hat, lambda, lambda, SolvePath::automatic);
}

FitResult rescale_source(const Dataset& data, const SourceEstimate& source) {
  validate_pairing(data.X, data.Y, source.w_hat);
  const Eigen::VectorXd xw = data.X * source.w_hat;
  const double denom = xw.squaredNorm();
  if (denom == 0.0)
    throw domain_error("X*w is the zero vector; the source direction is degenerate on this data");
  const double c = xw.dot(data.Y) / denom;
  FitResult result;
  result.beta_hat = c * source.w_hat;
  result.lambda = 0.0;
  result.eta = FitResult::eta_not_applicable();
  result.objective_value =
      (data.Y - data.X * result.beta_hat).squaredNorm() / static_cast<double>(data.n());
  return result;
}

Eigen::VectorXd predict(const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& X_new) {
  if (X_new.cols() != beta_hat.size())
    throw shape_error("cols(X_new) = " + std::to_string(X_new.cols()) + " but len(beta) = " +
                      std::to_string(beta_hat.size()));
  return X_new * beta_hat;
}

double angle_objective(const Dataset& data, const Eigen::VectorXd& w_hat, double lambda, double eta,
                       const Eigen::VectorXd& beta) {
  const double loss = (data.Y - data.X * beta).squaredNorm() / static_cast<double>(data.n());
  return loss + lambda * beta.squaredNorm() - 2.0 * eta * w_hat.dot(beta);
}

Eigen::VectorXd angle_objective_gradient(const Dataset& data, const Eigen::VectorXd& w_hat,
                                         double lambda, double eta, const Eigen::VectorXd& beta) {
  return (2.0 / static_cast<double>(data.n())) * (data.X.transpose() * (data.X * beta - data.Y)) +
         2.0 * lambda * beta - 2.0 * eta * w_hat;
}

}  // namespace angletl
