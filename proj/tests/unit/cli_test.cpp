#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "tailmes/backtest.hpp"
#include "tailmes/kv_config.hpp"

using namespace tailmes;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "tailmes");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const std::string kTinyStudy =
    "n = 200\nml = false\np_grid = 0.001\nreplications = 1\noracle_draws = 1000000\n";

std::string write_panel_csv(const oracle::TempDir& dir, std::size_t rows, bool caps = true) {
  backtest::SyntheticPanelSpec s;
  s.rows = rows;
  s.seed = 5;
  s.innovations.marginals.assign(3, dist::BurrParams{0.25, 20.0});
  s.innovations.copula = dist::equicorrelated_copula(3.0, 0.5, 3);
  s.garch.assign(3, garch::GarchParams{0.001, 0.1, 0.85});
  if (caps) s.caps = {1.0, 2.0, 3.0};
  const auto panel = backtest::synthetic_panel(s);
  std::ostringstream csv;
  backtest::write_price_csv(csv, panel);
  const std::string path = dir.file(caps ? "panel.csv" : "panel_nocap.csv");
  spit(path, csv.str());
  return path;
}

}  // namespace

TEST(CliSimulate, TinyRun) {
  oracle::TempDir dir("sim");
  spit(dir.file("s.cfg"), kTinyStudy);
  const Outcome o = run({"simulate", "--config", dir.file("s.cfg"), "--out", dir.file("s.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(line_count(slurp(dir.file("s.csv"))), 2u);
  EXPECT_NE(slurp(dir.file("s.csv.manifest.json")).find("\"config_text\""), std::string::npos);
}

TEST(CliSimulate, DefaultGridGivesSevenRows) {
  oracle::TempDir dir("grid");
  spit(dir.file("s.cfg"), "n = 500\nml = false\nreplications = 2\noracle_draws = 1000000\n");
  const Outcome o = run({"simulate", "--config", dir.file("s.cfg"), "--out", dir.file("s.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(line_count(slurp(dir.file("s.csv"))), 8u);
}

TEST(CliSimulate, ReproducibleAcrossRunsThreadsAndManifest) {
  oracle::TempDir dir("det");
  spit(dir.file("s.cfg"), "n = 300\nml = false\np_grid = 0.001, 0.0001\nreplications = 6\noracle_draws = 1000000\n");
  ASSERT_EQ(run({"simulate", "--config", dir.file("s.cfg"), "--out", dir.file("a.csv"), "--threads", "1"}).code, 0);
  ASSERT_EQ(run({"simulate", "--config", dir.file("s.cfg"), "--out", dir.file("b.csv"), "--threads", "3"}).code, 0);
  ASSERT_EQ(run({"simulate", "--config", dir.file("a.csv.manifest.json"), "--out", dir.file("c.csv")}).code, 0);
  const std::string a = slurp(dir.file("a.csv"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir.file("b.csv")));
  EXPECT_EQ(a, slurp(dir.file("c.csv")));
}

TEST(CliSimulate, SeedOverrideChangesResult) {
  oracle::TempDir dir("seed");
  spit(dir.file("s.cfg"), kTinyStudy);
  ASSERT_EQ(run({"simulate", "--config", dir.file("s.cfg"), "--out", dir.file("a.csv")}).code, 0);
  ASSERT_EQ(run({"simulate", "--config", dir.file("s.cfg"), "--out", dir.file("b.csv"), "--seed", "99"}).code, 0);
  EXPECT_NE(slurp(dir.file("a.csv")), slurp(dir.file("b.csv")));
}

TEST(CliSimulate, ConfigErrorsExitTwo) {
  oracle::TempDir dir("bad");
  spit(dir.file("s.cfg"), "rho = 1.5\n");
  Outcome o = run({"simulate", "--config", dir.file("s.cfg")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("rho"), std::string::npos) << o.err;
  spit(dir.file("u.cfg"), "n = 500\nbogus = 3\n");
  o = run({"simulate", "--config", dir.file("u.cfg")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("bogus"), std::string::npos);
  EXPECT_EQ(run({"simulate"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST(CliForecast, RecordsSidecarAndRetest) {
  oracle::TempDir dir("fc");
  const std::string panel = write_panel_csv(dir, 1100);
  const Outcome o = run({"forecast", panel, "--out", dir.file("f.csv"), "--threads", "1"});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string csv = slurp(dir.file("f.csv"));
  EXPECT_EQ(line_count(csv), 91u);

  std::istringstream in(csv);
  const auto stored = backtest::read_forecast_csv(in);
  const auto rec = std::find_if(stored.begin(), stored.end(), [](const auto& r) { return r.wald_p.has_value(); });
  ASSERT_NE(rec, stored.end());
  const Outcome t = run({"test", dir.file("f.csv"), rec->date});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("source recomputed"), std::string::npos);
  EXPECT_NE(t.out.find("p_value " + format_double(*rec->wald_p)), std::string::npos) << t.out;

  ASSERT_EQ(run({"forecast", "--config", dir.file("f.csv.manifest.json"), "--out", dir.file("g.csv")}).code, 0);
  EXPECT_EQ(csv, slurp(dir.file("g.csv")));
  EXPECT_EQ(slurp(dir.file("f.csv.sigma.csv")), slurp(dir.file("g.csv.sigma.csv")));
}

TEST(CliForecast, InputErrors) {
  oracle::TempDir dir("fe");
  const std::string nocap = write_panel_csv(dir, 1050, false);
  Outcome o = run({"forecast", nocap, "--out", dir.file("f.csv")});
  EXPECT_EQ(o.code, 2) << o.err;
  EXPECT_NE(o.err.find("mcap"), std::string::npos);

  const std::string panel = write_panel_csv(dir, 1050);
  o = run({"forecast", panel, "--out", dir.file("f.csv"), "--p", "0.5"});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("p:"), std::string::npos) << o.err;

  o = run({"forecast", panel, "--out", dir.file("f.csv"), "--window", "2000"});
  EXPECT_EQ(o.code, 2);

  std::string text = slurp(panel);
  const auto third = text.find('\n', text.find('\n', text.find('\n') + 1) + 1);
  text.insert(third + 1, "2099-01-01,1,1,1,1,1,1\n");
  spit(dir.file("broken.csv"), text);
  o = run({"forecast", dir.file("broken.csv"), "--out", dir.file("f.csv")});
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find("line 5"), std::string::npos) << o.err;

  EXPECT_EQ(run({"forecast", dir.file("missing.csv")}).code, 3);
}

TEST(CliTest, EqualWeightedForecastsGivePValueOne) {
  oracle::TempDir dir("eq");
  spit(dir.file("f.csv"),
       "date,theta_a,lo_a,hi_a,gamma_a,weight_a,theta_b,lo_b,hi_b,gamma_b,weight_b,wald_stat,wald_df,wald_p,flags\n"
       "2020-01-02,2,1.5,2.5,0.2,0.25,1,0.5,1.5,0.2,0.5,,,,\n");
  spit(dir.file("f.csv.sigma.csv"),
       "date,k,d_n,scale,sigma_a_a,sigma_a_b,sigma_b_b\n"
       "2020-01-02,227,100,10.7,0.04,0.01,0.04\n");
  const Outcome o = run({"test", dir.file("f.csv"), "2020-01-02"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("statistic 0\n"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("p_value 1\n"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("dof 1\n"), std::string::npos);

  EXPECT_EQ(run({"test", dir.file("f.csv"), "2020-01-03"}).code, 4);
  spit(dir.file("junk.csv"), "date,whatever\n2020-01-02,1\n");
  EXPECT_EQ(run({"test", dir.file("junk.csv"), "2020-01-02"}).code, 3);
  EXPECT_EQ(run({"test", dir.file("none.csv"), "2020-01-02"}).code, 3);
}

TEST(CliTest, UnequalContributionsRejected) {
  oracle::TempDir dir("neq");
  spit(dir.file("f.csv"),
       "date,theta_a,lo_a,hi_a,gamma_a,weight_a,theta_b,lo_b,hi_b,gamma_b,weight_b,wald_stat,wald_df,wald_p,flags\n"
       "2020-01-02,8,6,10,0.2,0.5,1,0.5,1.5,0.2,0.5,,,,\n");
  spit(dir.file("f.csv.sigma.csv"),
       "date,k,d_n,scale,sigma_a_a,sigma_a_b,sigma_b_b\n"
       "2020-01-02,227,100,10.7,0.04,0.01,0.04\n");
  const Outcome o = run({"test", dir.file("f.csv"), "2020-01-02"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto pos = o.out.find("p_value ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LT(std::stod(o.out.substr(pos + 8)), 1e-6);
}
