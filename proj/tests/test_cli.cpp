#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "frflow/cli.hpp"

using namespace frflow;
using namespace frflow::cli;

namespace {

struct Captured {
  int code;
  nlohmann::json json;
  std::string err;
};

Captured run_captured(const RunConfig& c) {
  std::ostringstream out, err;
  const int code = run(c, out, err);
  Captured r{code, nullptr, err.str()};
  if (!out.str().empty()) r.json = nlohmann::json::parse(out.str());
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, FlowSummaryAndRate) {
  RunConfig c;
  c.command = "flow";
  c.gen = "kl";
  c.pair = "two-point:e:1e-2";
  c.T = 5.0;
  const auto r = run_captured(c);
  EXPECT_EQ(r.code, kPass);
  EXPECT_GE(r.json["fitted_rates"]["D_f+D_fbar"].get<double>(), 0.99);
  EXPECT_LE(r.json["dissipation_residual"].get<double>(), 1e-5);
  EXPECT_LE(r.json["D_f_max_increase"].get<double>(), 1e-10);
}

TEST(Cli, FlowWritesFilesAtomically) {
  const auto dir = std::filesystem::path(::testing::TempDir()) / "frflow_cli_flow";
  std::filesystem::create_directories(dir);
  RunConfig c;
  c.command = "flow";
  c.gen = "reverse-kl";
  c.pair = "random:K=4";
  c.T = 0.5;
  c.store_state = true;
  c.out = (dir / "run").string();
  std::ostringstream out, err;
  EXPECT_EQ(run(c, out, err), kPass);
  EXPECT_TRUE(out.str().empty());
  const auto j = nlohmann::json::parse(slurp(dir / "run.json"));
  EXPECT_EQ(j["generator"], "reverse-kl");
  const auto csv = slurp(dir / "run.csv");
  EXPECT_NE(csv.find("rho_3"), std::string::npos);
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    EXPECT_EQ(e.path().extension() == ".tmp", false) << e.path();
  }
  std::filesystem::remove_all(dir);
}

TEST(Cli, FlowStiffStepIsNumericalFailure) {
  RunConfig c;
  c.command = "flow";
  c.gen = "chi2";
  c.pair = "random:K=8";
  c.dt = 0.05;
  const auto r = run_captured(c);
  EXPECT_EQ(r.code, kNumeric);
  EXPECT_NE(r.err.find("numerical"), std::string::npos);
}

TEST(Cli, CheckExitCodes) {
  RunConfig c;
  c.command = "check";
  c.subcommand = "gdc";
  c.gen = "kl";
  c.alpha = 0.01;
  c.samples = 200;
  const auto bad = run_captured(c);
  EXPECT_EQ(bad.code, kFail);
  EXPECT_FALSE(bad.json["passed"].get<bool>());
  c.gen = "power:-2";
  c.alpha = 0.1;
  EXPECT_EQ(run_captured(c).code, kPass);
  c.subcommand = "dual-conjugate";
  c.p = -1.0;
  const auto dc = run_captured(c);
  EXPECT_EQ(dc.code, kPass);
  EXPECT_EQ(dc.json["inequality_id"], "dual-conjugate");
}

TEST(Cli, CheckKpointDerivesAlpha) {
  RunConfig c;
  c.command = "check";
  c.subcommand = "kpoint";
  c.gen = "power:-2";
  c.samples = 500;
  const auto r = run_captured(c);
  EXPECT_EQ(r.code, kPass);
  EXPECT_GT(r.json["alpha_tested"].get<double>(), 0.0);
}

TEST(Cli, InvalidInputIsFailure) {
  RunConfig c;
  c.command = "check";
  c.subcommand = "gdc";
  c.gen = "nope";
  EXPECT_EQ(run_captured(c).code, kFail);
  c.command = "bogus";
  EXPECT_EQ(run_captured(c).code, kFail);
}

TEST(Cli, Geodesic) {
  RunConfig c;
  c.command = "geodesic";
  c.pair = "simplex:0.5,0.5/0.75,0.25";
  const auto r = run_captured(c);
  EXPECT_EQ(r.code, kPass);
  EXPECT_NEAR(r.json["distance_sq"].get<double>(), std::numbers::pi * std::numbers::pi / 36.0, 1e-12);
  EXPECT_LE(r.json["ode_endpoint_error"].get<double>(), 1e-6);
  EXPECT_LE(r.json["speed_relative_variation"].get<double>(), 1e-6);
}

TEST(Cli, CounterexampleSweep) {
  const auto dir = std::filesystem::path(::testing::TempDir()) / "frflow_cli_ce";
  std::filesystem::create_directories(dir);
  RunConfig c;
  c.command = "counterexample";
  c.subcommand = "twovalue-hessian";
  c.eps = 1.0;
  c.M = 5.0;
  c.sweep_M = {5.0, 8.0, 12.0};
  c.out = (dir / "tv").string();
  std::ostringstream out, err;
  EXPECT_EQ(run(c, out, err), kPass);
  const auto j = nlohmann::json::parse(slurp(dir / "tv.json"));
  EXPECT_NEAR(j["closed_form_value"].get<double>(), -0.3021903386704896, 1e-12);
  std::istringstream csv(slurp(dir / "tv.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3);
  std::filesystem::remove_all(dir);
}

TEST(Cli, DeterministicForFixedSeed) {
  RunConfig c;
  c.command = "check";
  c.subcommand = "gdc";
  c.gen = "reverse-kl";
  c.samples = 100;
  c.seed = 17;
  std::ostringstream a, b, e;
  run(c, a, e);
  run(c, b, e);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Cli, ConfigJson) {
  RunConfig c;
  c.command = "flow";
  const nlohmann::json j = c;
  EXPECT_EQ(j["command"], "flow");
  EXPECT_TRUE(j.contains("dt"));
}
