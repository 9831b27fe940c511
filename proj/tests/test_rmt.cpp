#include <doctest.h>

#include <cmath>

#include "angletl/errors.hpp"
#include "angletl/parallel.hpp"
#include "angletl/rmt.hpp"
#include "support/oracles.hpp"

using namespace angletl;

namespace {

RiskScenario base_scenario() {
  RiskScenario s;
  s.gamma = 2.0;
  s.alpha_t_sq = 1.0;
  s.alpha_s_sq = 1.0;
  s.rho = 0.9;
  s.sigma_sq = 0.5;
  s.spectrum = SpectralDistribution::identity();
  return s;
}

SpectralDistribution linspaced_spectrum(int atoms) {
  Eigen::VectorXd e = Eigen::VectorXd::LinSpaced(atoms, 0.2, 3.0);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(atoms, 1.0 / atoms);
  return SpectralDistribution(std::move(e), std::move(w));
}

}  // namespace

TEST_SUITE("rmt") {

TEST_CASE("zero covariance collapses the companion law to a point mass") {
  const SpectralDistribution zero = SpectralDistribution::point_mass(0.0);
  for (double lambda : {0.1, 1.0, 10.0}) {
    CHECK(stieltjes_v(zero, 2.0, lambda) == doctest::Approx(1.0 / lambda).epsilon(1e-13));
    CHECK(stieltjes_v_prime(zero, 2.0, lambda) ==
          doctest::Approx(1.0 / (lambda * lambda)).epsilon(1e-12));
  }
}

TEST_CASE("identity spectrum at gamma 2 has the closed-form root sqrt(2)-1") {
  const double v = stieltjes_v(SpectralDistribution::identity(), 2.0, 1.0);
  CHECK(v == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("solver agrees with the long double bisection reference") {
  const SpectralDistribution spectra[3] = {SpectralDistribution::identity(),
                                           SpectralDistribution::two_point(0.5, 2.0),
                                           linspaced_spectrum(50)};
  for (const auto& spectrum : spectra)
    for (double gamma : {0.5, 2.0})
      for (double lambda : {0.05, 0.3, 1.0, 7.0}) {
        const double v = stieltjes_v(spectrum, gamma, lambda);
        const long double ref = test_support::stieltjes_v_reference(spectrum, gamma, lambda);
        CHECK(std::abs(v - static_cast<double>(ref)) <= 1e-11 * static_cast<double>(ref));
      }
}

TEST_CASE("tail behavior: lambda v approaches 1") {
  for (const auto& spectrum :
       {SpectralDistribution::identity(), SpectralDistribution::two_point(0.5, 2.0)}) {
    const double v = stieltjes_v(spectrum, 2.0, 1e8);
    CHECK(std::abs(1e8 * v - 1.0) < 1e-4);
  }
}

TEST_CASE("derivative by implicit differentiation matches finite differences") {
  const SpectralDistribution spectra[2] = {SpectralDistribution::identity(),
                                           SpectralDistribution::two_point(0.5, 2.0)};
  for (const auto& spectrum : spectra)
    for (double gamma : {0.5, 2.0})
      for (double lambda : {0.1, 1.0, 10.0}) {
        const double vp = stieltjes_v_prime(spectrum, gamma, lambda);
        const double h = 1e-6 * std::max(1.0, lambda);
        const double fd = (stieltjes_v(spectrum, gamma, lambda - h) -
                           stieltjes_v(spectrum, gamma, lambda + h)) /
                          (2.0 * h);
        CHECK(std::abs(vp - fd) <= 1e-6 * std::abs(fd));
        CHECK(vp > 0.0);
      }
}

TEST_CASE("v' stays positive along the negative axis") {
  const SpectralDistribution spectrum = linspaced_spectrum(25);
  for (int i = 0; i < 40; ++i) {
    const double lambda = std::exp(-3.0 + 7.0 * i / 39.0);
    CHECK(stieltjes_v_prime(spectrum, 1.3, lambda) > 0.0);
  }
}

TEST_CASE("v(0) identity for gamma 2 with the identity spectrum") {
  CHECK(std::abs(v_at_zero(SpectralDistribution::identity(), 2.0) - 1.0) < 1e-6);
  CHECK_THROWS_AS(v_at_zero(SpectralDistribution::identity(), 0.5), regime_error);
  CHECK_THROWS_AS(v_at_zero(SpectralDistribution::point_mass(0.0), 2.0), regime_error);
}

TEST_CASE("risk bounds coincide at eta zero and drop the source entirely") {
  RiskScenario s = base_scenario();
  s.c_lower = 0.3;
  s.c_upper = 1.7;
  const RiskEvaluation eval = risk_bounds(s, 1.3, 0.0);
  CHECK(eval.risk_lower == eval.risk_upper);
  const double expected =
      1.3 * 1.3 * s.alpha_t_sq * (eval.v_value - 1.3 * eval.v_prime) /
          (s.gamma * (1.3 * eval.v_value) * (1.3 * eval.v_value)) +
      s.sigma_sq * eval.v_prime / (eval.v_value * eval.v_value);
  CHECK(eval.risk_lower == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("perfect noiseless source cancels the bias bracket") {
  RiskScenario s = base_scenario();
  s.rho = 1.0;
  s.alpha_s_sq = s.alpha_t_sq;
  const RiskEvaluation eval = risk_bounds(s, 0.8, 0.8);
  const double noise_only = s.sigma_sq * eval.v_prime / (eval.v_value * eval.v_value);
  CHECK(eval.risk_lower == doctest::Approx(noise_only).epsilon(1e-12));
  CHECK(eval.risk_upper == doctest::Approx(noise_only).epsilon(1e-12));
}

TEST_CASE("risk agrees with the high-precision double implementation") {
  const RiskScenario s = base_scenario();
  const RiskEvaluation eval = risk_bounds(s, 1.0, 1.0);
  const long double ref = test_support::risk_reference(s.spectrum, 2.0L, 1.0L, 1.0L, 0.9L, 0.5L,
                                                       0.0L, 1.0L, 1.0L);
  CHECK(std::abs(eval.risk_lower - static_cast<double>(ref)) <=
        1e-9 * static_cast<double>(ref));
}

TEST_CASE("minimal risk identity holds on a dense grid") {
  RiskScenario s = base_scenario();
  s.rho = 0.6;
  s.alpha_s_sq = 0.7;
  const OptimalTuning tuned = optimal_tuning(s);
  const double analytic = tuned.risk_min_upper;  // c = 0 on both ends
  double grid_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 120; ++i) {
    const double lam = tuned.lambda_star_at_c_upper * std::exp(-1.5 + 3.0 * i / 119.0);
    for (int j = 0; j < 120; ++j) {
      const double eta = lam * (-0.5 + 2.5 * j / 119.0);
      grid_min = std::min(grid_min, noiseless_risk(s, lam, eta));
    }
  }
  CHECK(grid_min >= analytic - 1e-9);
  CHECK(grid_min <= analytic * 1.003);
}

TEST_CASE("optimal tuning formulas") {
  RiskScenario s = base_scenario();
  SUBCASE("uncorrelated source recovers the plain ridge optimum") {
    s.rho = 0.0;
    const OptimalTuning tuned = optimal_tuning(s);
    CHECK(tuned.lambda_star_at_c_upper ==
          doctest::Approx(s.gamma * s.sigma_sq / s.alpha_t_sq).epsilon(1e-14));
    CHECK(tuned.eta_star_at_c_upper == 0.0);
    CHECK(tuned.risk_min_upper == doctest::Approx(target_only_minimal_risk(s)).epsilon(1e-12));
  }
  SUBCASE("worked example") {
    const OptimalTuning tuned = optimal_tuning(s);
    CHECK(tuned.lambda_star_at_c_upper == doctest::Approx(1.0 / 0.19).epsilon(1e-12));
    CHECK(tuned.eta_star_at_c_upper == doctest::Approx(0.9 / 0.19).epsilon(1e-12));
  }
  SUBCASE("lambda* decreases in the error level; risk endpoints stay ordered") {
    s.c_lower = 0.2;
    s.c_upper = 1.1;
    const OptimalTuning tuned = optimal_tuning(s);
    CHECK(tuned.lambda_star_at_c_lower >= tuned.lambda_star_at_c_upper);
    CHECK(tuned.risk_min_lower <= tuned.risk_min_upper);
  }
  SUBCASE("noiseless perfect correlation is a boundary case") {
    s.rho = 1.0;
    s.alpha_s_sq = 1.0;
    CHECK_THROWS_AS(optimal_tuning(s), regime_error);
  }
}

TEST_CASE("safeguard: tuned risk never exceeds the plain ridge optimum") {
  for (double rho : {0.0, 0.3, 0.7, 0.95})
    for (double c : {0.0, 0.5, 5.0}) {
      RiskScenario s = base_scenario();
      s.rho = rho;
      s.c_lower = c;
      s.c_upper = c;
      const OptimalTuning tuned = optimal_tuning(s);
      CHECK(tuned.risk_min_upper <= target_only_minimal_risk(s) + 1e-10);
    }
}

TEST_CASE("1/(lambda v) decreases in lambda for every spectrum tried") {
  const SpectralDistribution spectra[3] = {SpectralDistribution::identity(),
                                           SpectralDistribution::two_point(0.5, 2.0),
                                           linspaced_spectrum(40)};
  for (const auto& spectrum : spectra)
    for (double gamma : {0.5, 2.0}) {
      double prev = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 60; ++i) {
        const double lambda = std::exp(-4.0 + 8.0 * i / 59.0);
        const double value = 1.0 / (lambda * stieltjes_v(spectrum, gamma, lambda));
        CHECK(value < prev);
        prev = value;
      }
    }
}

TEST_CASE("noiseless risk is the zero-error bound") {
  RiskScenario s = base_scenario();
  const RiskEvaluation eval = risk_bounds(s, 0.7, 0.4);
  CHECK(noiseless_risk(s, 0.7, 0.4) == doctest::Approx(eval.risk_lower).epsilon(1e-14));
  s.c_upper = 0.5;
  CHECK_THROWS_AS(noiseless_risk(s, 0.7, 0.4), parameter_error);
}

TEST_CASE("risk is monotone in the correlation at the per-rho optimal eta") {
  RiskScenario s = base_scenario();
  s.c_lower = s.c_upper = 0.4;
  const double lambda = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95}) {
    s.rho = rho;
    const double eta =
        lambda * rho * std::sqrt(s.alpha_t_sq * s.alpha_s_sq) / (s.alpha_s_sq + s.c_upper);
    const double risk = risk_bounds(s, lambda, eta).risk_upper;
    CHECK(risk <= prev + 1e-12);
    prev = risk;
  }
}

TEST_CASE("at rho zero the risk is flat in eta to first order") {
  RiskScenario s = base_scenario();
  s.rho = 0.0;
  const double h = 1e-6;
  const double up = noiseless_risk(s, 1.0, h);
  const double down = noiseless_risk(s, 1.0, -h);
  CHECK(std::abs(up - down) / (2.0 * h) < 1e-9);
}

TEST_CASE("limit checks against the closed forms") {
  SUBCASE("gamma below one tends to the least squares risk") {
    RiskScenario s = base_scenario();
    s.gamma = 0.5;
    s.rho = 0.4;
    const LimitReport report = limit_checks(s);
    CHECK(report.limit_strong_signal == doctest::Approx(1.0));  // 0.5 / (1 - 0.5)
    CHECK(report.rel_dev_strong_signal < 0.01);
  }
  SUBCASE("gamma above one goes through v(0)") {
    RiskScenario s = base_scenario();
    const LimitReport report = limit_checks(s);
    CHECK(std::abs(report.v_zero - 1.0) < 1e-6);
    CHECK(report.rel_dev_strong_signal < 0.01);
  }
  SUBCASE("weak signal slope is the unexplained fraction times the trace mean") {
    RiskScenario s = base_scenario();
    s.spectrum = SpectralDistribution::two_point(0.5, 2.0);
    s.c_lower = s.c_upper = 0.3;
    const LimitReport report = limit_checks(s);
    CHECK(report.slope_limit ==
          doctest::Approx((1.0 - 0.81 / 1.3) * 1.25).epsilon(1e-12));
    CHECK(report.rel_dev_weak_signal < 0.02);

    // same slope extracted at alpha_t^2 = 1e-8
    RiskScenario tiny = s;
    tiny.alpha_t_sq = 1e-8;
    const double slope = (minimal_risk(tiny, 0.3) - s.sigma_sq) / tiny.alpha_t_sq;
    CHECK(std::abs(slope - report.slope_limit) <= 0.02 * report.slope_limit);
  }
  SUBCASE("mixed bracket is rejected") {
    RiskScenario s = base_scenario();
    s.c_upper = 1.0;
    CHECK_THROWS_AS(limit_checks(s), regime_error);
  }
}

TEST_CASE("scenario json round trip and failure modes") {
  const std::string text = R"({
    "gamma": 2.0, "alpha_t_sq": 1.0, "alpha_s_sq": 0.25, "rho": 0.9,
    "sigma_sq": 0.5, "c_lower": 0.0, "c_upper": 0.1,
    "spectrum": {"eigenvalues": [0.5, 2.0], "weights": [0.5, 0.5]}
  })";
  const RiskScenario s = scenario_from_json_text(text);
  CHECK(s.gamma == 2.0);
  CHECK(s.alpha_s_sq == 0.25);
  CHECK(s.spectrum.eigenvalues.size() == 2);
  CHECK_THROWS_AS(scenario_from_json_text("{not json"), format_error);
  CHECK_THROWS_AS(scenario_from_json_text("{\"gamma\": 2.0}"), format_error);
}

TEST_CASE("monte carlo trace agrees with the solver across spectra") {
  const SpectralDistribution spectra[3] = {SpectralDistribution::identity(),
                                           SpectralDistribution::two_point(0.5, 2.0),
                                           linspaced_spectrum(10)};
  const std::vector<double> lambdas = {1.0};
  for (const auto& spectrum : spectra)
    for (double gamma : {0.5, 2.0}) {
      const std::vector<double> mc = test_support::mc_companion_trace(
          spectrum, gamma, 2000, lambdas, 5, 12345, hardware_threads());
      const double v = stieltjes_v(spectrum, gamma, 1.0);
      CHECK(std::abs(mc[0] - v) <= 0.02 * v);
    }
}

}  // TEST_SUITE
