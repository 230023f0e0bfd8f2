#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "lanpredict/cli.hpp"
#include "lanpredict/report_io.hpp"

namespace lanpredict {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  }
  return lines;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lanpredict_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(CliTest, BoundPrintsEfficiencyBound) {
  const auto r = run({"bound", "--alpha", "1", "--beta", "0.5", "--h", "1"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("nu_star            = [[0.208833, -0.159046], [-0.159046, 0.208833]]"), std::string::npos)
      << r.out;
  EXPECT_NE(r.out.find("fisher_info        = [[1.333333, -0.666667], [-0.666667, 1.333333]]"), std::string::npos);
  EXPECT_NE(r.out.find("stationary_cov     = [[0.666667, -0.333333], [-0.333333, 0.666667]]"), std::string::npos);
  EXPECT_NE(r.out.find("xi                 = (0.223130, 0.606531)"), std::string::npos);
}

TEST_F(CliTest, DomainAndUsageErrorsExitOne) {
  const auto r = run({"bound", "--alpha", "0.5", "--beta", "0.5", "--h", "1"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("domain"), std::string::npos) << r.err;

  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"bound", "--no-such-flag"}).code, kExitUsage);
  EXPECT_EQ(run({"bound", "--h", "0"}).code, kExitUsage);
  EXPECT_EQ(run({"bound", "--alpha", "abc"}).code, kExitUsage);
  EXPECT_EQ(run({"risk", "--n_rep", "1"}).code, kExitUsage);
  EXPECT_EQ(run({"risk", "--estimator", "bfgs"}).code, kExitUsage);
  EXPECT_EQ(run({"risk", "--format", "xml"}).code, kExitUsage);
  EXPECT_EQ(run({"simulate", "--dt", "-0.1"}).code, kExitUsage);
  EXPECT_EQ(run({"simulate", "--scheme", "milstein", "--out_dir", dir_.string()}).code, kExitUsage);
  EXPECT_TRUE(fs::is_empty(dir_));
}

TEST_F(CliTest, SimulateWritesPathCsv) {
  const auto r = run({"simulate", "--T", "2", "--dt", "0.01", "--seed", "5", "--out_dir", dir_.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string text = slurp(dir_ / "path.csv");
  EXPECT_EQ(text.rfind("# lanpredict ", 0), 0u);
  EXPECT_NE(text.find("# seed: 5"), std::string::npos);
  const auto lines = data_lines(text);
  ASSERT_EQ(lines.size(), 202u);
  EXPECT_EQ(lines[0], "t,x1,x2,dw1,dw2");
  EXPECT_EQ(lines.back().substr(lines.back().size() - 2), ",,");
  EXPECT_FALSE(fs::exists(dir_ / "path.csv.tmp"));

  // Same invocation, same data rows.
  const fs::path again = dir_ / "again.csv";
  run({"simulate", "--T", "2", "--dt", "0.01", "--seed", "5", "--dump-path", again.string()});
  EXPECT_EQ(data_lines(slurp(again)), lines);
}

TEST_F(CliTest, EstimatePrintsBothEstimators) {
  const auto r = run({"estimate", "--T", "50", "--seed", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["method"], "newton");
  EXPECT_EQ(j[1]["method"], "decoupled");
  for (const auto& e : j) {
    for (const char* key : {"theta_hat", "converged", "iterations", "log_lik", "gradient_norm", "method"}) {
      EXPECT_TRUE(e.contains(key)) << key;
    }
    EXPECT_EQ(e["theta_hat"].size(), 2u);
  }
  EXPECT_TRUE(j[0]["converged"].get<bool>());
  EXPECT_LT(j[0]["gradient_norm"].get<double>(), 1e-10);
}

TEST_F(CliTest, EstimateFromSuppliedPathMatchesFreshPath) {
  const fs::path p = dir_ / "p.csv";
  ASSERT_EQ(run({"simulate", "--T", "20", "--seed", "9", "--stream", "2", "--dump-path", p.string()}).code, kExitOk);
  const auto fresh = run({"estimate", "--T", "20", "--seed", "9", "--stream", "2"});
  const auto supplied = run({"estimate", "--path", p.string()});
  ASSERT_EQ(supplied.code, kExitOk) << supplied.err;
  const auto a = nlohmann::json::parse(fresh.out);
  const auto b = nlohmann::json::parse(supplied.out);
  for (int k = 0; k < 2; ++k) {
    EXPECT_DOUBLE_EQ(a[0]["theta_hat"][k].get<double>(), b[0]["theta_hat"][k].get<double>());
  }
}

TEST_F(CliTest, RiskWritesSchemaRows) {
  const auto r = run({"risk", "--T", "10", "--n_rep", "30", "--dt", "0.02", "--out_dir", dir_.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = data_lines(slurp(dir_ / "risks.csv"));
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], "T,stat,n_rep,n_flagged,m11,m12,m21,m22,se11,se12,se21,se22");
  std::vector<std::string> stats;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto a = lines[i].find(',');
    stats.push_back(lines[i].substr(a + 1, lines[i].find(',', a + 1) - a - 1));
  }
  EXPECT_EQ(stats, (std::vector<std::string>{"t_qer", "t_qep", "t_qer_aux", "t_qep_aux", "mle_var", "bound"}));
}

TEST_F(CliTest, RiskJsonFormat) {
  const auto r = run({"risk", "--T", "10", "--n_rep", "10", "--format", "json", "--out_dir", dir_.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir_ / "risks.json"));
  EXPECT_EQ(j["meta"]["version"], kVersion);
  EXPECT_EQ(j["data"].size(), 6u);
}

TEST_F(CliTest, ConvergenceFromConfigFile) {
  const fs::path cfg = dir_ / "default.json";
  std::ofstream(cfg) << R"({"alpha": 1.0, "beta": 0.5, "h": 1.0, "T_grid": [25, 50, 100, 200], "dt": 0.05,
                           "n_rep": 12, "seed": 42, "estimator": "newton", "s_rule": "t_minus_sqrt_t",
                           "out_dir": ")"
                      << (dir_ / "out").string() << R"(", "format": "csv"})";
  const auto r = run({"convergence", "--config", cfg.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = data_lines(slurp(dir_ / "out" / "convergence.csv"));
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0],
            "T,trace_t_qer,trace_t_qep,trace_bound,frob_rel_qer,frob_rel_qep,gap_qer_qep,drift_mc,drift_analytic,"
            "theta_gap");
  EXPECT_EQ(lines[1].rfind("25,", 0), 0u);
  EXPECT_EQ(lines[4].rfind("200,", 0), 0u);
  EXPECT_EQ(data_lines(slurp(dir_ / "out" / "risks.csv")).size(), 1u + 4u * 6u);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "dt_refinement.csv"));
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const fs::path cfg = dir_ / "c.json";
  std::ofstream(cfg) << R"({"alpha": 2.0, "beta": 0.0, "h": 1.0})";
  const auto from_file = run({"bound", "--config", cfg.string()});
  EXPECT_NE(from_file.out.find("theta = (2, 0)"), std::string::npos) << from_file.out;
  const auto overridden = run({"bound", "--config", cfg.string(), "--alpha", "1", "--beta", "0.5"});
  EXPECT_NE(overridden.out.find("theta = (1, 0.5)"), std::string::npos) << overridden.out;

  std::ofstream(dir_ / "bad.json") << R"({"alpha": 1.0, "gamma": 3})";
  const auto bad = run({"bound", "--config", (dir_ / "bad.json").string()});
  EXPECT_EQ(bad.code, kExitUsage);
  EXPECT_NE(bad.err.find("gamma"), std::string::npos);
  EXPECT_EQ(run({"bound", "--config", (dir_ / "missing.json").string()}).code, kExitUsage);
}

TEST_F(CliTest, SelftestPasses) {
  const auto r = run({"selftest"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_GE(data_lines(r.out).size(), 9u);
}

TEST_F(CliTest, CheckLanReportsEveryDiagnostic) {
  const auto r = run({"check-lan", "--T", "10", "--n_rep", "50"});
  EXPECT_TRUE(r.code == kExitOk || r.code == kExitCheckFailed);
  for (const char* name : {"score_covariance", "score_skewness_1", "score_kurtosis_2", "score_drift", "theta_gap"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  }
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, BinaryExitCodesAndThreadIndependence) {
  const std::string bin = LANPREDICT_CLI_PATH;
  EXPECT_EQ(shell(bin + " bound --alpha 0.5 --beta 0.5 --h 1 > /dev/null 2>&1"), 1);
  EXPECT_EQ(shell(bin + " selftest > /dev/null 2>&1"), 0);

  const std::string common = " convergence --T_grid 10,20 --n_rep 16 --dt 0.05 --skip-dt-refinement --out_dir ";
  ASSERT_EQ(shell("LANPREDICT_THREADS=1 " + bin + common + (dir_ / "a").string() + " > /dev/null 2>&1"), 0);
  ASSERT_EQ(shell("LANPREDICT_THREADS=3 " + bin + common + (dir_ / "b").string() + " > /dev/null 2>&1"), 0);
  for (const char* f : {"convergence.csv", "risks.csv"}) {
    EXPECT_EQ(data_lines(slurp(dir_ / "a" / f)), data_lines(slurp(dir_ / "b" / f))) << f;
  }
  EXPECT_EQ(shell("LANPREDICT_THREADS=x " + bin + " bound > /dev/null 2>&1"), 1);
}

}  // namespace
}  // namespace lanpredict
