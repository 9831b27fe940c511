#include <doctest.h>

#include "angletl/errors.hpp"
#include "angletl/estimators.hpp"
#include "angletl/rng.hpp"
#include "support/oracles.hpp"

using namespace angletl;

namespace {

Dataset random_dataset(rng::Stream& stream, int n, int p, double noise = 1.0) {
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = stream.normal();
  const Eigen::VectorXd beta = stream.normal_vector(p) / std::sqrt(static_cast<double>(p));
  const Eigen::VectorXd y = x * beta + noise * stream.normal_vector(n);
  return Dataset(std::move(x), y);
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("worked 1x2 example solves the 2x2 system by hand") {
  Eigen::MatrixXd x(1, 2);
  x << 1.0, 0.0;
  Eigen::VectorXd y(1);
  y << 2.0;
  Eigen::VectorXd w(2);
  w << 1.0, 1.0;
  const FitResult fit = fit_angle_tl(Dataset(x, y), SourceEstimate(w), {1.0, 1.0});
  CHECK(fit.beta_hat[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(fit.beta_hat[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("target-only with identity design is a diagonal solve") {
  const FitResult fit =
      fit_target_only(Dataset(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2)), 1.0);
  CHECK(fit.beta_hat[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(fit.beta_hat[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("huge lambda shrinks the fit to zero") {
  rng::Stream stream(1);
  const Dataset data = random_dataset(stream, 12, 6);
  const FitResult fit = fit_target_only(data, 1e12);
  CHECK(fit.beta_hat.norm() <= 1e-9);
}

TEST_CASE("closed form matches the iterative minimizer on a 10x20 instance") {
  rng::Stream stream(2);
  const Dataset data = random_dataset(stream, 10, 20);
  const Eigen::VectorXd w = stream.normal_vector(20);
  const FitResult fit = fit_angle_tl(data, SourceEstimate(w), {0.5, 0.3});
  const Eigen::VectorXd oracle =
      test_support::minimize_angle_objective(data.X, data.Y, w, 0.5, 0.3);
  CHECK((fit.beta_hat - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("distance fit matches the minimizer of the distance objective on 8x5") {
  rng::Stream stream(3);
  const Dataset data = random_dataset(stream, 8, 5);
  const Eigen::VectorXd w = stream.normal_vector(5);
  const FitResult fit = fit_dist_tl(data, SourceEstimate(w), 0.7);
  const Eigen::VectorXd oracle =
      test_support::minimize_distance_objective(data.X, data.Y, w, 0.7);
  CHECK((fit.beta_hat - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("distance fit converges to the source as lambda grows") {
  rng::Stream stream(4);
  const Dataset data = random_dataset(stream, 9, 4);
  const Eigen::VectorXd w = stream.normal_vector(4);
  const FitResult fit = fit_dist_tl(data, SourceEstimate(w), 1e12);
  CHECK((fit.beta_hat - w).cwiseAbs().maxCoeff() < 1e-6 * w.norm());
}

TEST_CASE("zero source makes the distance fit a plain ridge fit") {
  rng::Stream stream(5);
  const Dataset data = random_dataset(stream, 7, 3);
  const FitResult dist = fit_dist_tl(data, SourceEstimate(Eigen::VectorXd::Zero(3)), 0.4);
  const FitResult ridge = fit_target_only(data, 0.4);
  CHECK((dist.beta_hat - ridge.beta_hat).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reduction identities hold to working precision") {
  rng::Stream stream(6);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + static_cast<int>(stream.bounded(12));
    const int p = 2 + static_cast<int>(stream.bounded(12));
    const Dataset data = random_dataset(stream, n, p);
    const SourceEstimate w(stream.normal_vector(p));
    const double lambda = std::exp(stream.uniform(-2.0, 2.0));
    const FitResult eta_zero = fit_angle_tl(data, w, {lambda, 0.0});
    const FitResult ridge = fit_target_only(data, lambda);
    CHECK((eta_zero.beta_hat - ridge.beta_hat).cwiseAbs().maxCoeff() < 1e-12);
    const FitResult eta_lambda = fit_angle_tl(data, w, {lambda, lambda});
    const FitResult dist = fit_dist_tl(data, w, lambda);
    CHECK((eta_lambda.beta_hat - dist.beta_hat).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dual and primal solve paths agree when p > n") {
  rng::Stream stream(7);
  const Dataset data = random_dataset(stream, 8, 25);
  const Eigen::VectorXd w = stream.normal_vector(25);
  for (double eta : {0.0, 0.3, -0.2}) {
    const FitResult dual = fit_angle_tl(data, SourceEstimate(w), {0.2, eta}, SolvePath::dual);
    const FitResult primal = fit_angle_tl(data, SourceEstimate(w), {0.2, eta}, SolvePath::primal);
    const double scale = std::max(1.0, primal.beta_hat.norm());
    CHECK((dual.beta_hat - primal.beta_hat).norm() / scale < 1e-10);
  }
}

TEST_CASE("gradient at the solution vanishes") {
  rng::Stream stream(8);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 4 + static_cast<int>(stream.bounded(20));
    const int p = 2 + static_cast<int>(stream.bounded(20));
    const Dataset data = random_dataset(stream, n, p);
    const Eigen::VectorXd w = stream.normal_vector(p);
    const double lambda = std::exp(stream.uniform(-1.5, 1.5));
    const double eta = stream.uniform(-1.0, 2.0);
    const FitResult fit = fit_angle_tl(data, SourceEstimate(w), {lambda, eta});
    const Eigen::VectorXd grad = angle_objective_gradient(data, w, lambda, eta, fit.beta_hat);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-8 * (1.0 + fit.beta_hat.norm()));
  }
}

TEST_CASE("objective value is reported at the solution") {
  rng::Stream stream(9);
  const Dataset data = random_dataset(stream, 10, 6);
  const Eigen::VectorXd w = stream.normal_vector(6);
  const FitResult fit = fit_angle_tl(data, SourceEstimate(w), {0.8, 0.5});
  const double recomputed = angle_objective(data, w, 0.8, 0.5, fit.beta_hat);
  CHECK(std::abs(fit.objective_value - recomputed) <= 1e-10 * (1.0 + std::abs(recomputed)));
}

TEST_CASE("growing eta aligns the fit with the source direction") {
  rng::Stream stream(10);
  Eigen::MatrixXd x(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) x(i, j) = stream.normal();
  const Eigen::VectorXd y = stream.normal_vector(10);
  const Dataset data(x, y);
  const Eigen::VectorXd w = stream.normal_vector(10);
  // shrinkage-dominated regime: lambda far above the data curvature
  const double lambda = 1e6;
  double previous = -2.0;
  for (double eta : {0.0, 1.0, 10.0, 1e2, 1e4, 1e6, 1e8}) {
    const FitResult fit = fit_angle_tl(data, SourceEstimate(w), {lambda, eta});
    if (eta == 0.0) continue;  // zero fit direction is undefined
    const double cos = cosine_angle(fit.beta_hat, w);
    CHECK(cos >= previous - 1e-12);
    previous = cos;
  }
  const FitResult fit = fit_angle_tl(data, SourceEstimate(w), {lambda, 1e8});
  const double cos = cosine_angle(fit.beta_hat, w);
  CHECK(std::sqrt(std::max(0.0, 1.0 - cos * cos)) < 1e-4);
}

TEST_CASE("nonpositive lambda is rejected") {
  rng::Stream stream(11);
  const Dataset data = random_dataset(stream, 5, 3);
  CHECK_THROWS_AS(fit_target_only(data, 0.0), parameter_error);
  CHECK_THROWS_AS(fit_target_only(data, -1.0), parameter_error);
  CHECK_THROWS_AS(fit_angle_tl(data, SourceEstimate(Eigen::VectorXd::Ones(3)), {0.0, 0.1}),
                  parameter_error);
}

TEST_CASE("conditioning failure is a numeric error") {
  Eigen::MatrixXd x(2, 2);
  x << 1e9, 0.0, 0.0, 1e-9;
  Eigen::VectorXd y(2);
  y << 1.0, 1.0;
  CHECK_THROWS_AS(fit_target_only(Dataset(x, y), 1e-3), numeric_error);
}

TEST_CASE("rescale recovers an exact multiple") {
  rng::Stream stream(12);
  Eigen::MatrixXd x(6, 3);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = stream.normal();
  const Eigen::VectorXd w = stream.normal_vector(3);
  const Eigen::VectorXd y = 2.0 * (x * w);
  const FitResult fit = rescale_source(Dataset(x, y), SourceEstimate(w));
  CHECK((fit.beta_hat - 2.0 * w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fit.lambda == 0.0);
  CHECK(std::isnan(fit.eta));
}

TEST_CASE("rescale of an orthogonal response is zero") {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, 1.0;
  Eigen::VectorXd w(1);
  w << 1.0;
  Eigen::VectorXd y(2);
  y << 1.0, -1.0;  // orthogonal to Xw = (1,1)
  const FitResult fit = rescale_source(Dataset(x, y), SourceEstimate(w));
  CHECK(fit.beta_hat[0] == 0.0);
}

TEST_CASE("rescale scalar example") {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, 1.0;
  Eigen::VectorXd w(1);
  w << 1.0;
  Eigen::VectorXd y(2);
  y << 1.0, 3.0;
  const FitResult fit = rescale_source(Dataset(x, y), SourceEstimate(w));
  CHECK(fit.beta_hat[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("rescale with a null direction fails") {
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 0.0, 1.0, 0.0;
  Eigen::VectorXd w(2);
  w << 0.0, 1.0;  // Xw = 0
  CHECK_THROWS_AS(rescale_source(Dataset(x, Eigen::VectorXd::Ones(2)), SourceEstimate(w)),
                  domain_error);
}

TEST_CASE("predict") {
  Eigen::VectorXd beta(2);
  beta << 1.0, -1.0;
  Eigen::MatrixXd x(1, 2);
  x << 2.0, 1.0;
  CHECK(predict(beta, x)[0] == 1.0);
  CHECK(predict(Eigen::VectorXd::Zero(2), x)[0] == 0.0);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  CHECK((predict(beta, eye) - beta).norm() == 0.0);
  CHECK_THROWS_AS(predict(beta, Eigen::MatrixXd::Zero(1, 3)), shape_error);
}

}  // TEST_SUITE
