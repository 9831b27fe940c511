#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "angletl/csv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "angletl_cli_tests";

struct RunResult {
  int exit_code = -1;
  std::string stderr_text;
};

RunResult run_cli(const std::string& args) {
  const fs::path err = kWork / "stderr.txt";
  const std::string cmd = std::string(ANGLETL_CLI_PATH) + " " + args + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(err);
  std::stringstream buf;
  buf << in.rdbuf();
  result.stderr_text = buf.str();
  return result;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Fixture {
  Fixture() {
    fs::create_directories(kWork);
    write_file(kWork / "x.csv", "1,0\n0,1\n1,1\n");
    write_file(kWork / "y.csv", "1\n1\n2\n");
    write_file(kWork / "w.csv", "1\n1\n");
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("fit without a source runs the plain ridge path") {
  Fixture fixture;
  const auto out = (kWork / "fit1").string();
  const RunResult run = run_cli("fit --x " + (kWork / "x.csv").string() + " --y " +
                                (kWork / "y.csv").string() + " --lambda 1.0 --out " + out);
  REQUIRE(run.exit_code == 0);
  const json summary = json::parse(slurp(out + "_summary.json"));
  CHECK(summary["method"] == "target_only");
  CHECK(fs::exists(out + "_beta.csv"));
}

TEST_CASE("fit labels the distance special case") {
  Fixture fixture;
  const auto out = (kWork / "fit2").string();
  const RunResult run = run_cli("fit --x " + (kWork / "x.csv").string() + " --y " +
                                (kWork / "y.csv").string() + " --w " + (kWork / "w.csv").string() +
                                " --lambda 0.5 --eta 0.5 --out " + out);
  REQUIRE(run.exit_code == 0);
  const json summary = json::parse(slurp(out + "_summary.json"));
  CHECK(summary["method"] == "distTL");
}

TEST_CASE("malformed csv exits 2 with a machine-readable error") {
  Fixture fixture;
  write_file(kWork / "bad.csv", "1,2\n3\n");
  const RunResult run = run_cli("fit --x " + (kWork / "bad.csv").string() + " --y " +
                                (kWork / "y.csv").string() + " --lambda 1 --out " +
                                (kWork / "fit3").string());
  CHECK(run.exit_code == 2);
  const json err = json::parse(run.stderr_text.substr(0, run.stderr_text.find('\n')));
  CHECK(err["error"]["type"] == "format");
  const std::string message = err["error"]["message"];
  CHECK(message.find("bad.csv") != std::string::npos);
  CHECK(message.find("line 2") != std::string::npos);
}

TEST_CASE("numeric failure exits 3") {
  Fixture fixture;
  write_file(kWork / "huge.csv", "1e9,0\n0,1e-9\n");
  write_file(kWork / "y2.csv", "1\n1\n");
  const RunResult run = run_cli("fit --x " + (kWork / "huge.csv").string() + " --y " +
                                (kWork / "y2.csv").string() + " --lambda 1e-3 --out " +
                                (kWork / "fit4").string());
  CHECK(run.exit_code == 3);
}

TEST_CASE("predict applies coefficients") {
  Fixture fixture;
  const auto out = (kWork / "pred.csv").string();
  const RunResult run = run_cli("predict --x " + (kWork / "x.csv").string() + " --w " +
                                (kWork / "w.csv").string() + " --out " + out);
  REQUIRE(run.exit_code == 0);
  const Eigen::VectorXd pred = angletl::load_vector_csv(out);
  CHECK(pred[2] == 2.0);
}

TEST_CASE("tune writes a singleton surface and is seed-stable") {
  Fixture fixture;
  write_file(kWork / "grid.json", R"({"lambdas": [1.0], "eta_ratios": [0.0]})");
  const auto out1 = (kWork / "tune1").string();
  const auto out2 = (kWork / "tune2").string();
  const std::string base = "tune --x " + (kWork / "x.csv").string() + " --y " +
                           (kWork / "y.csv").string() + " --w " + (kWork / "w.csv").string() +
                           " --grid " + (kWork / "grid.json").string() + " --folds 3 --seed 42";
  REQUIRE(run_cli(base + " --out " + out1).exit_code == 0);
  REQUIRE(run_cli(base + " --out " + out2).exit_code == 0);
  const std::string surface = slurp(out1 + "_surface.csv");
  CHECK(surface == slurp(out2 + "_surface.csv"));
  CHECK(std::count(surface.begin(), surface.end(), '\n') == 2);  // header + one row
  CHECK(slurp(out1 + "_best.json") == slurp(out2 + "_best.json"));
}

TEST_CASE("tune with more folds than rows exits 2") {
  Fixture fixture;
  const RunResult run = run_cli("tune --x " + (kWork / "x.csv").string() + " --y " +
                                (kWork / "y.csv").string() + " --w " + (kWork / "w.csv").string() +
                                " --folds 9 --out " + (kWork / "tune3").string());
  CHECK(run.exit_code == 2);
}

TEST_CASE("risk reports the tuned parameters") {
  Fixture fixture;
  write_file(kWork / "scenario.json", R"({
    "gamma": 2.0, "alpha_t_sq": 1.0, "alpha_s_sq": 1.0, "rho": 0.0, "sigma_sq": 0.5,
    "spectrum": {"eigenvalues": [1.0], "weights": [1.0]}
  })");
  write_file(kWork / "rgrid.json", R"({"lambdas": [0.5, 1.0], "eta_ratios": [0.0, 1.0]})");
  const auto out = (kWork / "risk1").string();
  const RunResult run = run_cli("risk --scenario " + (kWork / "scenario.json").string() +
                                " --grid " + (kWork / "rgrid.json").string() + " --out " + out);
  REQUIRE(run.exit_code == 0);
  const json report = json::parse(slurp(out + "_report.json"));
  CHECK(report["eta_star_at_c_upper"] == 0.0);
  CHECK(std::abs(report["v_at_zero"].get<double>() - 1.0) < 1e-6);
  const std::string surface = slurp(out + "_surface.csv");
  CHECK(surface.rfind("lambda,eta,risk_lower,risk_upper", 0) == 0);
}

TEST_CASE("malformed scenario exits 2") {
  Fixture fixture;
  write_file(kWork / "bad_scenario.json", "{broken");
  const RunResult run = run_cli("risk --scenario " + (kWork / "bad_scenario.json").string() +
                                " --out " + (kWork / "risk2").string());
  CHECK(run.exit_code == 2);
}

TEST_CASE("simulate produces stable tables and rejects unknown figures") {
  Fixture fixture;
  write_file(kWork / "spec.json", R"({
    "figure": "fig2_noiseless_risk", "replicates": 2, "master_seed": 11,
    "panels": [[0.9, 2.0, 2.0]], "lambda_grid": {"count": 5}
  })");
  const auto dir1 = (kWork / "sim1").string();
  const auto dir2 = (kWork / "sim2").string();
  REQUIRE(run_cli("simulate --spec " + (kWork / "spec.json").string() + " --out " + dir1)
              .exit_code == 0);
  REQUIRE(run_cli("simulate --spec " + (kWork / "spec.json").string() + " --out " + dir2)
              .exit_code == 0);
  CHECK(fs::exists(fs::path(dir1) / "fig2_results.csv"));
  CHECK(fs::exists(fs::path(dir1) / "manifest.json"));
  CHECK(slurp(fs::path(dir1) / "fig2_results.csv") == slurp(fs::path(dir2) / "fig2_results.csv"));

  write_file(kWork / "bad_spec.json", R"({"figure": "fig9_unknown"})");
  CHECK(run_cli("simulate --spec " + (kWork / "bad_spec.json").string() + " --out " +
                (kWork / "sim3").string())
            .exit_code == 2);
}

TEST_CASE("aggregate combines a directory of coefficient files") {
  Fixture fixture;
  const fs::path dir = kWork / "sources";
  fs::create_directories(dir);
  write_file(dir / "w_a.csv", "1\n0\n");
  write_file(dir / "w_b.csv", "0.8\n0.6\n");
  const auto out = (kWork / "agg1").string();
  REQUIRE(run_cli("aggregate --w-dir " + dir.string() + " --out " + out).exit_code == 0);
  const json result = json::parse(slurp(out + "_result.json"));
  CHECK(result["method"] == "spectral");
  CHECK(fs::exists(out + "_w.csv"));

  const auto out2 = (kWork / "agg2").string();
  REQUIRE(run_cli("aggregate --w-dir " + dir.string() + " --x " + (kWork / "x.csv").string() +
                  " --y " + (kWork / "y.csv").string() + " --out " + out2)
              .exit_code == 0);
  const json result2 = json::parse(slurp(out2 + "_result.json"));
  CHECK(result2["method"] == "validation_ls");
}

TEST_CASE("missing required flags exit 2") {
  const RunResult run = run_cli("fit --lambda 1");
  CHECK(run.exit_code == 2);
}

}  // TEST_SUITE
