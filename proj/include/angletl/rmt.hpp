#pragma once

#include <string>

#include "angletl/types.hpp"

namespace angletl {

/// Asymptotic parameter bundle: aspect ratio gamma = lim p/n, signal
/// strengths alpha_t^2 = E||beta||^2 and alpha_s^2 = E||w||^2, coefficient
/// correlation rho, noise variance sigma^2, the eigenvalue support
/// [c_lower, c_upper] of the source estimation-error covariance (in the
/// convention Cov(delta) = Sigma_delta / p), and the population spectral
/// distribution of the target covariance.
struct RiskScenario {
  double gamma = 1.0;
  double alpha_t_sq = 1.0;
  double alpha_s_sq = 1.0;
  double rho = 0.0;
  double sigma_sq = 1.0;
  double c_lower = 0.0;
  double c_upper = 0.0;
  SpectralDistribution spectrum = SpectralDistribution::identity();

  void validate() const;
};

struct RiskEvaluation {
  double lambda = 0.0;
  double eta = 0.0;
  double risk_lower = 0.0;  // at c_lower
  double risk_upper = 0.0;  // at c_upper
  double v_value = 0.0;     // v(-lambda)
  double v_prime = 0.0;     // v'(-lambda)
};

/// Companion Stieltjes transform v(-lambda) of the limiting eigenvalue law
/// of XX'/n, obtained as the unique positive root of the self-consistent
/// equation
///   1/v = lambda + gamma * integral t / (1 + t v) dF_Sigma(t).
/// Damped fixed-point iteration with a bisection fallback on the bracket
/// [1/(lambda + gamma t_max), 1/lambda].
double stieltjes_v(const SpectralDistribution& spectrum, double gamma, double lambda);

/// v'(-lambda) by implicit differentiation of the fixed-point equation:
///   v' = 1 / (1/v^2 - gamma * integral t^2/(1 + t v)^2 dF_Sigma(t)).
double stieltjes_v_prime(const SpectralDistribution& spectrum, double gamma, double lambda);

/// Limiting predictive risk for a single error level C:
///   (lambda^2 a_t^2 + eta^2 a_s^2 + eta^2 C - 2 lambda eta rho a_t a_s)
///       * (v - lambda v') / (gamma (lambda v)^2)  +  sigma^2 v'/v^2.
/// The noise and variance term is sigma^2 v'/v^2; together with the bias
/// kernel this reproduces sigma^2/(lambda* v(-lambda*)) at the optimal
/// tuning and the correct sigma^2 floor as lambda grows.
double risk_value(const SpectralDistribution& spectrum, double gamma, double alpha_t_sq,
                  double alpha_s_sq, double rho, double sigma_sq, double c, double lambda,
                  double eta);

/// Risk bracket [R(C_L), R(C_U)] for a scenario at (lambda, eta).
RiskEvaluation risk_bounds(const RiskScenario& s, double lambda, double eta);

struct OptimalTuning {
  double lambda_star_at_c_lower = 0.0;  // gamma sigma^2 / (a_t^2 (1 - rho^2 a_s^2/(a_s^2+C_L)))
  double lambda_star_at_c_upper = 0.0;
  double eta_star_at_c_lower = 0.0;     // lambda* rho a_t a_s / (a_s^2 + C)
  double eta_star_at_c_upper = 0.0;
  double risk_min_lower = 0.0;          // sigma^2 / (lambda*_L v(-lambda*_L))
  double risk_min_upper = 0.0;
};

/// Risk-optimal tuning parameters and the minimal-risk interval. Note that
/// lambda* decreases in C, so lambda*(C_L) >= lambda*(C_U) while the risk
/// endpoints stay ordered through the decreasing map 1/(lambda v(-lambda)).
OptimalTuning optimal_tuning(const RiskScenario& s);

/// Exact limiting risk when the source estimate carries no estimation
/// error (c_lower = c_upper = 0).
double noiseless_risk(const RiskScenario& s, double lambda, double eta);

/// v(0) as the limit of v(-lambda) for lambda -> 0+, by Richardson
/// extrapolation over lambda in {1e-8, 1e-9, 1e-10}. Only defined for
/// gamma > 1 with a spectrum bounded away from zero.
double v_at_zero(const SpectralDistribution& spectrum, double gamma);

/// Optimal lambda of the plain ridge fit, gamma sigma^2 / alpha_t^2.
double target_only_optimal_lambda(const RiskScenario& s);
/// Its minimal risk sigma^2 / (lambda v(-lambda)).
double target_only_minimal_risk(const RiskScenario& s);

/// Minimal risk sigma^2/(lambda* v(-lambda*)) at error level C, evaluated
/// in the cancellation-free form sigma^2 (1 + gamma I1(v)/lambda*).
double minimal_risk(const RiskScenario& s, double c);

/// Behavior of the minimal risk at extreme target signal strengths,
/// compared with the closed-form limits. Requires c_lower == c_upper.
struct LimitReport {
  double trace_mean = 0.0;      // T, the mean of the spectrum
  double signal_term = 0.0;     // 1 - rho^2 a_s^2 / (a_s^2 + C)
  // strong signal, alpha_t^2 = 1e6
  double risk_strong_signal = 0.0;
  double limit_strong_signal = 0.0;  // sigma^2/(1-gamma) if gamma < 1, else a_t^2 s/(gamma v(0))
  double rel_dev_strong_signal = 0.0;
  double v_zero = 0.0;               // only for gamma > 1
  // weak signal, alpha_t^2 = 1e-6: slope of (R* - sigma^2) in alpha_t^2
  double slope_weak_signal = 0.0;
  double slope_limit = 0.0;          // s * T
  double rel_dev_weak_signal = 0.0;
};
LimitReport limit_checks(const RiskScenario& s);

/// Loads a scenario from JSON (gamma, alpha_t_sq, alpha_s_sq, rho,
/// sigma_sq, c_lower, c_upper, spectrum.{eigenvalues,weights}).
RiskScenario scenario_from_json_file(const std::string& path);
RiskScenario scenario_from_json_text(const std::string& text);

}  // namespace angletl
