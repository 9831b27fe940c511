#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "angletl/aggregation.hpp"
#include "angletl/csv.hpp"
#include "angletl/errors.hpp"
#include "angletl/estimators.hpp"
#include "angletl/parallel.hpp"
#include "angletl/rmt.hpp"
#include "angletl/simulation.hpp"
#include "angletl/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string x_path, y_path, w_path, w_dir, grid_path, scenario_path, spec_path, out_path;
  std::optional<double> lambda, eta;
  int folds = 3;
  std::uint64_t seed = 0;
  int threads = 1;
  bool has_header = false;
};

[[noreturn]] void fail(int code, const std::string& type, const std::string& message,
                       const std::string& hint) {
  json err;
  err["error"] = {{"type", type}, {"message", message}};
  std::cerr << err.dump() << '\n';
  if (!hint.empty()) std::cerr << "hint: " << hint << '\n';
  std::exit(code);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw angletl::io_error("cannot open '" + path + "' for writing");
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

angletl::TuneGrid grid_from_json(const std::string& path) {
  using angletl::TuneGrid;
  std::ifstream in(path);
  if (!in) throw angletl::io_error("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw angletl::format_error(path + ": " + e.what());
  }
  TuneGrid grid = TuneGrid::defaults();
  try {
    if (j.contains("mode")) {
      const std::string mode = j["mode"].get<std::string>();
      if (mode == "angle")
        grid.mode = TuneGrid::Mode::angle;
      else if (mode == "dist")
        grid.mode = TuneGrid::Mode::dist;
      else if (mode == "target_only")
        grid.mode = TuneGrid::Mode::target_only;
      else
        throw angletl::parameter_error("grid mode must be angle, dist or target_only");
    }
    if (j.contains("lambdas")) {
      const auto lams = j["lambdas"].get<std::vector<double>>();
      grid.lambdas = Eigen::Map<const Eigen::VectorXd>(lams.data(),
                                                       static_cast<Eigen::Index>(lams.size()));
    } else if (j.contains("lambda_min")) {
      const double lo = j.at("lambda_min").get<double>();
      const double hi = j.at("lambda_max").get<double>();
      const int count = j.value("lambda_count", 50);
      if (!(lo > 0.0 && hi > lo && count >= 2))
        throw angletl::parameter_error("need 0 < lambda_min < lambda_max and lambda_count >= 2");
      grid.lambdas.resize(count);
      for (int i = 0; i < count; ++i)
        grid.lambdas[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1));
    }
    if (j.contains("eta_ratios")) {
      const auto ratios = j["eta_ratios"].get<std::vector<double>>();
      grid.eta_ratios = Eigen::Map<const Eigen::VectorXd>(
          ratios.data(), static_cast<Eigen::Index>(ratios.size()));
    }
  } catch (const json::exception& e) {
    throw angletl::format_error(path + ": " + e.what());
  }
  grid.validate();
  return grid;
}

int cmd_fit(const CommonOpts& opt) {
  const Eigen::MatrixXd x = angletl::load_matrix_csv(opt.x_path, opt.has_header);
  const Eigen::VectorXd y = angletl::load_vector_csv(opt.y_path, opt.has_header);
  const angletl::Dataset data(x, y);
  if (!opt.lambda) throw angletl::parameter_error("fit requires --lambda");

  angletl::FitResult fit;
  std::string method;
  if (opt.w_path.empty()) {
    if (opt.eta && *opt.eta != 0.0)
      throw angletl::parameter_error("--eta without --w has no source direction to use");
    fit = angletl::fit_target_only(data, *opt.lambda);
    method = "target_only";
  } else {
    const angletl::SourceEstimate source(angletl::load_vector_csv(opt.w_path, opt.has_header));
    if (!opt.eta) throw angletl::parameter_error("fit with --w requires --eta");
    fit = angletl::fit_angle_tl(data, source, {*opt.lambda, *opt.eta});
    method = (*opt.eta == 0.0) ? "target_only" : (*opt.eta == *opt.lambda ? "distTL" : "angleTL");
  }

  angletl::save_vector_csv(opt.out_path + "_beta.csv", fit.beta_hat);
  json summary;
  summary["method"] = method;
  summary["lambda"] = fit.lambda;
  summary["eta"] = fit.eta;
  summary["objective_value"] = fit.objective_value;
  summary["n"] = data.n();
  summary["p"] = data.p();
  write_text(opt.out_path + "_summary.json", summary.dump(2));
  return 0;
}

int cmd_predict(const CommonOpts& opt) {
  const Eigen::MatrixXd x = angletl::load_matrix_csv(opt.x_path, opt.has_header);
  const Eigen::VectorXd beta = angletl::load_vector_csv(opt.w_path, opt.has_header);
  angletl::save_vector_csv(opt.out_path, angletl::predict(beta, x));
  return 0;
}

int cmd_tune(const CommonOpts& opt) {
  const Eigen::MatrixXd x = angletl::load_matrix_csv(opt.x_path, opt.has_header);
  const Eigen::VectorXd y = angletl::load_vector_csv(opt.y_path, opt.has_header);
  const angletl::Dataset data(x, y);
  const angletl::SourceEstimate source(angletl::load_vector_csv(opt.w_path, opt.has_header));
  const angletl::TuneGrid grid =
      opt.grid_path.empty() ? angletl::TuneGrid::defaults() : grid_from_json(opt.grid_path);
  const angletl::CvPlan plan{opt.folds, opt.seed};
  const angletl::CvResult cv = angletl::cross_validate(data, source, grid, plan, opt.threads);

  angletl::write_cv_surface_csv(opt.out_path + "_surface.csv", cv);
  double best_mse = 0.0;
  for (const angletl::CvPoint& point : cv.surface)
    if (point.lambda == cv.best.lambda && point.eta == cv.best.eta) best_mse = point.cv_mse;
  json best;
  best["lambda"] = cv.best.lambda;
  best["eta"] = cv.best.eta;
  best["cv_mse"] = best_mse;
  best["folds"] = opt.folds;
  best["seed"] = opt.seed;
  write_text(opt.out_path + "_best.json", best.dump(2));

  json manifest;
  manifest["seed"] = opt.seed;
  manifest["version"] = ANGLETL_VERSION;
  manifest["created_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count();
  write_text(opt.out_path + "_manifest.json", manifest.dump(2));
  return 0;
}

int cmd_aggregate(const CommonOpts& opt) {
  if (opt.w_dir.empty()) throw angletl::parameter_error("aggregate requires --w-dir");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(opt.w_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw angletl::io_error("no .csv coefficient files found in '" + opt.w_dir + "'");

  std::vector<angletl::SourceEstimate> estimates;
  for (const std::string& file : files)
    estimates.emplace_back(angletl::load_vector_csv(file, opt.has_header),
                           fs::path(file).stem().string());
  const angletl::SourceBundle bundle(std::move(estimates));

  angletl::AggregationResult result;
  if (!opt.x_path.empty() && !opt.y_path.empty()) {
    const angletl::Dataset validation(angletl::load_matrix_csv(opt.x_path, opt.has_header),
                                      angletl::load_vector_csv(opt.y_path, opt.has_header));
    result = angletl::aggregate_validation(bundle, validation);
  } else {
    result = angletl::aggregate_spectral(bundle);
  }
  angletl::save_vector_csv(opt.out_path + "_w.csv", result.w_agg);
  write_text(opt.out_path + "_result.json", angletl::aggregation_result_json(result));
  return 0;
}

int cmd_risk(const CommonOpts& opt) {
  const angletl::RiskScenario scenario = angletl::scenario_from_json_file(opt.scenario_path);
  const angletl::TuneGrid grid =
      opt.grid_path.empty() ? angletl::TuneGrid::defaults() : grid_from_json(opt.grid_path);

  std::ofstream surface(opt.out_path + "_surface.csv");
  if (!surface) throw angletl::io_error("cannot open risk surface output");
  surface << "lambda,eta,risk_lower,risk_upper\n";
  for (Eigen::Index i = 0; i < grid.lambdas.size(); ++i)
    for (double ratio : grid.active_ratios()) {
      const double lam = grid.lambdas[i];
      const angletl::RiskEvaluation eval = angletl::risk_bounds(scenario, lam, ratio * lam);
      surface << angletl::format_full(lam) << ',' << angletl::format_full(ratio * lam) << ','
              << angletl::format_full(eval.risk_lower) << ','
              << angletl::format_full(eval.risk_upper) << '\n';
    }
  surface.close();

  const angletl::OptimalTuning tuned = angletl::optimal_tuning(scenario);
  json report;
  report["gamma"] = scenario.gamma;
  report["lambda_star_at_c_lower"] = tuned.lambda_star_at_c_lower;
  report["lambda_star_at_c_upper"] = tuned.lambda_star_at_c_upper;
  report["eta_star_at_c_lower"] = tuned.eta_star_at_c_lower;
  report["eta_star_at_c_upper"] = tuned.eta_star_at_c_upper;
  report["risk_min_lower"] = tuned.risk_min_lower;
  report["risk_min_upper"] = tuned.risk_min_upper;
  report["target_only_lambda"] = angletl::target_only_optimal_lambda(scenario);
  report["target_only_risk"] = angletl::target_only_minimal_risk(scenario);
  report["trace_mean"] = scenario.spectrum.mean();
  if (scenario.gamma > 1.0 && scenario.spectrum.min_eigenvalue() > 0.0)
    report["v_at_zero"] = angletl::v_at_zero(scenario.spectrum, scenario.gamma);
  write_text(opt.out_path + "_report.json", report.dump(2));
  return 0;
}

int cmd_simulate(const CommonOpts& opt) {
  const angletl::ExperimentSpec spec = angletl::ExperimentSpec::from_json_file(opt.spec_path);
  const angletl::SimulationResult result = angletl::run_experiment(spec, opt.threads);
  angletl::write_results(result, opt.out_path);
  return 0;
}

void add_common(CLI::App* sub, CommonOpts& opt) {
  sub->add_option("--x", opt.x_path, "design matrix CSV");
  sub->add_option("--y", opt.y_path, "response vector CSV");
  sub->add_option("--w", opt.w_path, "coefficient vector CSV");
  sub->add_option("--w-dir", opt.w_dir, "directory of coefficient CSVs");
  sub->add_option("--lambda", opt.lambda, "ridge penalty strength");
  sub->add_option("--eta", opt.eta, "concordance penalty strength");
  sub->add_option("--folds", opt.folds, "cross-validation folds")->default_val(3);
  sub->add_option("--seed", opt.seed, "random seed")->default_val(0);
  sub->add_option("--grid", opt.grid_path, "tuning grid JSON");
  sub->add_option("--scenario", opt.scenario_path, "risk scenario JSON");
  sub->add_option("--spec", opt.spec_path, "experiment spec JSON");
  sub->add_option("--out", opt.out_path, "output path or prefix")->required();
  sub->add_option("--threads", opt.threads, "worker threads (1 = serial)")->default_val(1);
  sub->add_flag("--has-header", opt.has_header, "input CSVs carry a header row");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"angle-based transfer learning for high-dimensional ridge regression"};
  app.require_subcommand(1);

  CommonOpts opt;
  auto* fit = app.add_subcommand("fit", "fit a penalized transfer model");
  auto* predict = app.add_subcommand("predict", "apply coefficients to new data");
  auto* tune = app.add_subcommand("tune", "cross-validate the penalty grid");
  auto* aggregate = app.add_subcommand("aggregate", "combine multiple source estimates");
  auto* risk = app.add_subcommand("risk", "theoretical risk surface and optimal tuning");
  auto* simulate = app.add_subcommand("simulate", "run a synthetic study");
  for (CLI::App* sub : {fit, predict, tune, aggregate, risk, simulate}) add_common(sub, opt);
  fit->get_option("--x")->required();
  fit->get_option("--y")->required();
  predict->get_option("--x")->required();
  predict->get_option("--w")->required();
  tune->get_option("--x")->required();
  tune->get_option("--y")->required();
  tune->get_option("--w")->required();
  risk->get_option("--scenario")->required();
  simulate->get_option("--spec")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(2, "usage", e.what(), "run with --help for the flag list");
  }

  try {
    if (*fit) return cmd_fit(opt);
    if (*predict) return cmd_predict(opt);
    if (*tune) return cmd_tune(opt);
    if (*aggregate) return cmd_aggregate(opt);
    if (*risk) return cmd_risk(opt);
    if (*simulate) return cmd_simulate(opt);
  } catch (const angletl::numeric_error& e) {
    fail(3, "numeric", e.what(), "the computation did not converge or is ill conditioned");
  } catch (const angletl::io_error& e) {
    fail(2, "io", e.what(), "check that the path exists and is readable/writable");
  } catch (const angletl::format_error& e) {
    fail(2, "format", e.what(), "check the file content at the reported location");
  } catch (const angletl::shape_error& e) {
    fail(2, "shape", e.what(), "check that matrix and vector dimensions agree");
  } catch (const angletl::parameter_error& e) {
    fail(2, "parameter", e.what(), "check the flag values");
  } catch (const angletl::domain_error& e) {
    fail(2, "domain", e.what(), "the input data is degenerate for this operation");
  } catch (const angletl::regime_error& e) {
    fail(2, "regime", e.what(), "the requested quantity is undefined for these parameters");
  } catch (const std::exception& e) {
    fail(3, "internal", e.what(), "");
  }
  return 0;
}
