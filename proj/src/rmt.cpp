#include "angletl/rmt.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "angletl/errors.hpp"

namespace angletl {

namespace {

constexpr double kTolBase = 1e-12;
constexpr int kIterationBudget = 100000;

double integral_t_over(const SpectralDistribution& f, double v) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.eigenvalues.size(); ++i)
    acc += f.weights[i] * f.eigenvalues[i] / (1.0 + f.eigenvalues[i] * v);
  return acc;
}

double integral_t_sq_over(const SpectralDistribution& f, double v) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.eigenvalues.size(); ++i) {
    const double d = 1.0 + f.eigenvalues[i] * v;
    acc += f.weights[i] * f.eigenvalues[i] * f.eigenvalues[i] / (d * d);
  }
  return acc;
}

}  // namespace

void RiskScenario::validate() const {
  if (!(gamma > 0.0)) throw parameter_error("gamma must be positive");
  if (!(alpha_t_sq > 0.0)) throw parameter_error("alpha_t_sq must be positive");
  if (alpha_s_sq < 0.0) throw parameter_error("alpha_s_sq must be nonnegative");
  if (!(rho >= -1.0 && rho <= 1.0)) throw parameter_error("rho must lie in [-1, 1]");
  if (!(sigma_sq > 0.0)) throw parameter_error("sigma_sq must be positive");
  if (c_lower < 0.0 || c_upper < c_lower)
    throw parameter_error("error-spectrum bounds need 0 <= c_lower <= c_upper");
}

double stieltjes_v(const SpectralDistribution& spectrum, double gamma, double lambda) {
  if (!(lambda > 0.0)) throw parameter_error("stieltjes_v requires lambda > 0");
  if (!(gamma > 0.0)) throw parameter_error("gamma must be positive");
  const double t_max = spectrum.max_eigenvalue();
  if (t_max == 0.0) return 1.0 / lambda;  // companion law is a point mass at 0

  const double hi = 1.0 / lambda;
  const double lo = 1.0 / (lambda + gamma * t_max);
  auto tol_at = [](double v) { return kTolBase * std::max(1.0, v); };
  auto g = [&](double v) { return 1.0 / (lambda + gamma * integral_t_over(spectrum, v)); };

  // Damped fixed point. At the root, g'(v) = gamma I2 v^2 < 1 whenever v'
  // is finite, so the damped map contracts; the bisection below is the
  // safety net.
  double v = 0.5 * (lo + hi);
  int used = 0;
  double residual = 0.0;
  for (; used < kIterationBudget / 2; ++used) {
    const double next = g(v);
    residual = std::abs(next - v);
    v = 0.5 * (v + next);
    if (residual <= tol_at(v)) return g(v);
  }

  double a = lo, b = hi;
  auto sign_fn = [&](double x) { return 1.0 / x - lambda - gamma * integral_t_over(spectrum, x); };
  for (; used < kIterationBudget; ++used) {
    const double mid = 0.5 * (a + b);
    if (b - a <= tol_at(mid)) return mid;
    (sign_fn(mid) > 0.0 ? a : b) = mid;
  }
  throw numeric_error("stieltjes_v did not converge; last residual " + std::to_string(residual));
}

double stieltjes_v_prime(const SpectralDistribution& spectrum, double gamma, double lambda) {
  const double v = stieltjes_v(spectrum, gamma, lambda);
  const double denom = 1.0 / (v * v) - gamma * integral_t_sq_over(spectrum, v);
  if (!(denom > 0.0))
    throw numeric_error("implicit differentiation of v degenerated (denominator " +
                        std::to_string(denom) + ")");
  return 1.0 / denom;
}

double risk_value(const SpectralDistribution& spectrum, double gamma, double alpha_t_sq,
                  double alpha_s_sq, double rho, double sigma_sq, double c, double lambda,
                  double eta) {
  const double v = stieltjes_v(spectrum, gamma, lambda);
  const double vp = stieltjes_v_prime(spectrum, gamma, lambda);
  const double bias_kernel = (v - lambda * vp) / (gamma * (lambda * v) * (lambda * v));
  const double alpha_t = std::sqrt(alpha_t_sq), alpha_s = std::sqrt(alpha_s_sq);
  const double bracket = lambda * lambda * alpha_t_sq + eta * eta * (alpha_s_sq + c) -
                         2.0 * lambda * eta * rho * alpha_t * alpha_s;
  return bracket * bias_kernel + sigma_sq * vp / (v * v);
}

RiskEvaluation risk_bounds(const RiskScenario& s, double lambda, double eta) {
  s.validate();
  RiskEvaluation eval;
  eval.lambda = lambda;
  eval.eta = eta;
  eval.v_value = stieltjes_v(s.spectrum, s.gamma, lambda);
  eval.v_prime = stieltjes_v_prime(s.spectrum, s.gamma, lambda);
  const double bias_kernel =
      (eval.v_value - lambda * eval.v_prime) / (s.gamma * (lambda * eval.v_value) * (lambda * eval.v_value));
  const double noise_term = s.sigma_sq * eval.v_prime / (eval.v_value * eval.v_value);
  const double alpha_t = std::sqrt(s.alpha_t_sq), alpha_s = std::sqrt(s.alpha_s_sq);
  const double base = lambda * lambda * s.alpha_t_sq - 2.0 * lambda * eta * s.rho * alpha_t * alpha_s;
  eval.risk_lower = (base + eta * eta * (s.alpha_s_sq + s.c_lower)) * bias_kernel + noise_term;
  eval.risk_upper = (base + eta * eta * (s.alpha_s_sq + s.c_upper)) * bias_kernel + noise_term;
  return eval;
}

namespace {

// 1 - rho^2 a_s^2 / (a_s^2 + C); the effective fraction of target signal
// the source cannot explain.
double signal_fraction(const RiskScenario& s, double c) {
  const double denom = s.alpha_s_sq + c;
  if (denom == 0.0) return 1.0;  // no source signal and no source error
  const double frac = 1.0 - s.rho * s.rho * s.alpha_s_sq / denom;
  if (!(frac > 0.0))
    throw regime_error(
        "optimal tuning undefined: rho^2 a_s^2/(a_s^2+C) >= 1; this is the noiseless "
        "perfect-correlation limit, where the source already determines the target direction");
  return frac;
}

double lambda_star(const RiskScenario& s, double c) {
  return s.gamma * s.sigma_sq / (s.alpha_t_sq * signal_fraction(s, c));
}

double eta_star(const RiskScenario& s, double c, double lam) {
  const double denom = s.alpha_s_sq + c;
  if (denom == 0.0) return 0.0;
  return lam * s.rho * std::sqrt(s.alpha_t_sq) * std::sqrt(s.alpha_s_sq) / denom;
}

}  // namespace

double minimal_risk(const RiskScenario& s, double c) {
  const double lam = lambda_star(s, c);
  const double v = stieltjes_v(s.spectrum, s.gamma, lam);
  // sigma^2/(lambda v) evaluated through the fixed-point identity
  // 1/(lambda v) = 1 + gamma I1(v)/lambda, stable for very large lambda.
  return s.sigma_sq * (1.0 + s.gamma * integral_t_over(s.spectrum, v) / lam);
}

OptimalTuning optimal_tuning(const RiskScenario& s) {
  s.validate();
  OptimalTuning out;
  out.lambda_star_at_c_lower = lambda_star(s, s.c_lower);
  out.lambda_star_at_c_upper = lambda_star(s, s.c_upper);
  out.eta_star_at_c_lower = eta_star(s, s.c_lower, out.lambda_star_at_c_lower);
  out.eta_star_at_c_upper = eta_star(s, s.c_upper, out.lambda_star_at_c_upper);
  out.risk_min_lower = minimal_risk(s, s.c_lower);
  out.risk_min_upper = minimal_risk(s, s.c_upper);
  return out;
}

double noiseless_risk(const RiskScenario& s, double lambda, double eta) {
  if (s.c_lower != 0.0 || s.c_upper != 0.0)
    throw parameter_error("noiseless_risk requires c_lower = c_upper = 0");
  return risk_value(s.spectrum, s.gamma, s.alpha_t_sq, s.alpha_s_sq, s.rho, s.sigma_sq, 0.0,
                    lambda, eta);
}

double v_at_zero(const SpectralDistribution& spectrum, double gamma) {
  if (!(gamma > 1.0))
    throw regime_error("v(0) is finite only for gamma > 1; got gamma = " + std::to_string(gamma));
  if (!(spectrum.min_eigenvalue() > 0.0))
    throw regime_error("v(0) requires a spectrum bounded away from zero");
  // v(-lambda) = v(0) - lambda v'(0) + O(lambda^2); two Richardson stages
  // with ratio 10 remove the linear and quadratic terms.
  const double v8 = stieltjes_v(spectrum, gamma, 1e-8);
  const double v9 = stieltjes_v(spectrum, gamma, 1e-9);
  const double v10 = stieltjes_v(spectrum, gamma, 1e-10);
  const double a0 = (10.0 * v9 - v8) / 9.0;
  const double a1 = (10.0 * v10 - v9) / 9.0;
  return (100.0 * a1 - a0) / 99.0;
}

double target_only_optimal_lambda(const RiskScenario& s) {
  return s.gamma * s.sigma_sq / s.alpha_t_sq;
}

double target_only_minimal_risk(const RiskScenario& s) {
  const double lam = target_only_optimal_lambda(s);
  const double v = stieltjes_v(s.spectrum, s.gamma, lam);
  return s.sigma_sq * (1.0 + s.gamma * integral_t_over(s.spectrum, v) / lam);
}

LimitReport limit_checks(const RiskScenario& s) {
  s.validate();
  if (s.c_lower != s.c_upper)
    throw regime_error("limit_checks treats the precise case; set c_lower = c_upper");
  const double c = s.c_upper;

  LimitReport report;
  report.trace_mean = s.spectrum.mean();
  report.signal_term = signal_fraction(s, c);

  RiskScenario strong = s;
  strong.alpha_t_sq = 1e6;
  report.risk_strong_signal = minimal_risk(strong, c);
  if (s.gamma < 1.0) {
    report.limit_strong_signal = s.sigma_sq / (1.0 - s.gamma);
  } else if (s.gamma > 1.0) {
    report.v_zero = v_at_zero(s.spectrum, s.gamma);
    report.limit_strong_signal =
        strong.alpha_t_sq * report.signal_term / (s.gamma * report.v_zero);
  } else {
    throw regime_error("strong-signal limit is undefined at gamma = 1");
  }
  report.rel_dev_strong_signal =
      std::abs(report.risk_strong_signal - report.limit_strong_signal) /
      std::abs(report.limit_strong_signal);

  RiskScenario weak = s;
  weak.alpha_t_sq = 1e-6;
  report.slope_weak_signal = (minimal_risk(weak, c) - s.sigma_sq) / weak.alpha_t_sq;
  report.slope_limit = report.signal_term * report.trace_mean;
  report.rel_dev_weak_signal =
      std::abs(report.slope_weak_signal - report.slope_limit) / std::abs(report.slope_limit);
  return report;
}

namespace {

RiskScenario scenario_from_json(const nlohmann::json& j) {
  const auto& spec = j.at("spectrum");
  std::vector<double> eigs = spec.at("eigenvalues").get<std::vector<double>>();
  std::vector<double> weights = spec.at("weights").get<std::vector<double>>();
  Eigen::VectorXd e = Eigen::Map<Eigen::VectorXd>(eigs.data(), static_cast<Eigen::Index>(eigs.size()));
  Eigen::VectorXd w =
      Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  RiskScenario s{j.at("gamma").get<double>(),
                 j.at("alpha_t_sq").get<double>(),
                 j.at("alpha_s_sq").get<double>(),
                 j.at("rho").get<double>(),
                 j.at("sigma_sq").get<double>(),
                 j.value("c_lower", 0.0),
                 j.value("c_upper", 0.0),
                 SpectralDistribution(std::move(e), std::move(w))};
  s.validate();
  return s;
}

}  // namespace

RiskScenario scenario_from_json_text(const std::string& text) {
  try {
    return scenario_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("scenario JSON: ") + e.what());
  }
}

RiskScenario scenario_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

}  // namespace angletl
