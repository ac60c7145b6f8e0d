// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// The two simulation designs take most of the time (a few minutes each on one
// core); everything else finishes in about two minutes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Cholesky>

#include "cli.hpp"
#include "oracles.hpp"
#include "tailmes/backtest.hpp"
#include "tailmes/distributions.hpp"
#include "tailmes/evt.hpp"
#include "tailmes/garch.hpp"
#include "tailmes/inference.hpp"
#include "tailmes/numeric.hpp"
#include "tailmes/simlab.hpp"
#include "tailmes/tail_dependence.hpp"

using namespace tailmes;

namespace {

struct Report {
  int failures = 0;
  void line(int id, bool ok, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Collects named sub-checks; the summary names every failed one.
struct Checks {
  bool ok = true;
  std::string failed;
  void expect(bool cond, const std::string& name) {
    if (cond) return;
    ok = false;
    failed += (failed.empty() ? "" : ", ") + name;
  }
  std::string summary(const std::string& what) const { return ok ? what : "failed: " + failed; }
};

std::size_t threads() { return numeric::resolve_threads(0); }

const sim::SimRow& row_at(const sim::SimResult& r, double p) {
  for (const auto& row : r.rows)
    if (row.p == p) return row;
  throw std::runtime_error("no row for p");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  return {m.col(c).data(), m.col(c).data() + m.rows()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tailmes");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

// --------------------------------------------------------------------------
// 1-3: simulation designs.

void simulation_designs(Report& report) {
  sim::SimConfig large;  // defaults: n = 1000, full grid, ML on, 1000 replications
  sim::SimConfig small = large;
  small.n = 500;

  const auto t0 = std::chrono::steady_clock::now();
  const sim::OracleTable oracle = sim::build_oracle_table(large, threads());
  const sim::SimResult r1000 = sim::run_study(large, threads(), &oracle);
  const double t_large = seconds_since(t0);
  const sim::SimResult r500 = sim::run_study(small, threads(), &oracle);
  const double t_total = seconds_since(t0);

  const double c1a = row_at(r1000, 0.001).coverage;
  const double c1b = row_at(r1000, 0.00001).coverage;
  report.line(1, std::abs(c1a - 90.4) <= 3.0 && std::abs(c1b - 93.5) <= 3.0,
              "n=1000 coverage " + fmt("%.1f", c1a) + " at 0.1% (90.4 +- 3), " + fmt("%.1f", c1b) +
                  " at 0.001% (93.5 +- 3); failed replications " +
                  std::to_string(r1000.failed_replications) + "; " + fmt("%.0f s", t_large));

  const double c2 = row_at(r500, 0.00001).coverage;
  bool order = true;
  std::string rmse;
  for (double p : {0.0001, 0.00001}) {
    const auto& row = row_at(r500, p);
    order = order && row.rmse_ml < row.rmse && row.rmse < row.rmse_np;
    rmse += fmt(" p=%g:", p) + fmt(" ML %.2f", row.rmse_ml) + fmt(" EVT %.2f", row.rmse) +
            fmt(" NP %.2f", row.rmse_np);
  }
  report.line(2, std::abs(c2 - 93.9) <= 3.0 && order,
              "n=500 coverage " + fmt("%.1f", c2) + " at 0.001% (93.9 +- 3); RMSE" + rmse + "; " +
                  fmt("%.0f s total", t_total));

  const double d1000 = row_at(r1000, 0.00001).coverage - row_at(r1000, 0.01).coverage;
  const double d500 = row_at(r500, 0.00001).coverage - row_at(r500, 0.01).coverage;
  report.line(3, d1000 >= 5.0 && d500 >= 5.0,
              "coverage(0.001%) - coverage(1%): n=1000 " + fmt("%+.1f", d1000) + ", n=500 " +
                  fmt("%+.1f", d500) + " (need >= 5)");
}

// --------------------------------------------------------------------------
// 4: exact algebraic invariants.

void algebraic_invariants(Report& report) {
  Checks c;
  std::mt19937_64 gen(4);
  std::student_t_distribution<double> t(3.0);

  Eigen::MatrixXd res(2000, 4);
  for (Eigen::Index i = 0; i < res.size(); ++i) res.data()[i] = t(gen);
  std::vector<double> gammas;
  std::vector<std::size_t> ks(4, 150);
  for (Eigen::Index j = 0; j < 4; ++j) gammas.push_back(evt::hill(column(res, j), 150));
  const auto cov = tail::estimate_tail_covariance(res, gammas, ks, 200);
  for (Eigen::Index d = 0; d < 4; ++d)
    c.expect(std::abs(cov.sigma(d, d) - gammas[d] * gammas[d]) <= 1e-10, "sigma_dd");

  const auto cfg = evt::TailConfig::from_rule(1000, 0.0001);
  const auto f = evt::assemble_forecast(0.8, 3.1, 0.27, cfg, 0.05);
  const double point = f.theta_hat_np_level;
  c.expect(std::abs(f.ci_upper / point - point / f.ci_lower) <= 1e-10 * (f.ci_upper / point), "ci symmetry");
  c.expect(std::abs(f.ci_upper * f.ci_lower / (point * point) - 1.0) <= 1e-10, "ci product");

  const std::vector<double> equal(5, 0.37);
  const auto w = inference::wald_test(equal, Eigen::MatrixXd::Identity(5, 5) * 0.3, 100.0);
  c.expect(w.statistic && std::abs(*w.statistic) <= 1e-10, "wald zero");

  for (std::size_t d : {2u, 3u, 8u, 20u})
    c.expect(inference::contrast_matrix(d).rowwise().sum().cwiseAbs().maxCoeff() <= 1e-10, "contrast rows");

  // d_n = 1: k = n p, so the extrapolated value is the within-sample MES and
  // the interval collapses to the point.
  evt::TailConfig unit;
  unit.n = 1000;
  unit.k = unit.k1 = 100;
  unit.p = 0.1;
  c.expect(std::abs(unit.extrapolation_depth() - 1.0) <= 1e-10, "d_n");
  c.expect(std::abs(evt::mes_extrapolate(2.5, 0.3, unit) - 2.5) <= 1e-10, "collapse point");
  c.expect(std::abs(evt::interval_factor(0.3, unit, 0.05) - 1.0) <= 1e-10, "collapse interval");

  backtest::SyntheticPanelSpec s;
  s.rows = 1037;
  s.seed = 44;
  s.innovations.marginals.assign(2, dist::BurrParams{0.25, 20.0});
  s.innovations.copula = dist::equicorrelated_copula(3.0, 0.5, 2);
  s.garch.assign(2, garch::GarchParams{0.001, 0.1, 0.85});
  s.caps = {1.0, 2.0};
  const auto panel = backtest::synthetic_panel(s);
  const auto recs = backtest::rolling_forecast(panel, backtest::BacktestOptions{});
  c.expect(recs.size() == panel.rows() - 1010 && backtest::window_count(panel.rows(), 1000, 10) == recs.size(),
           "window count");
  c.expect(backtest::window_count(5283, 1000, 10) == 4273, "window count 5283");

  report.line(4, c.ok, c.summary("sigma_dd, CI symmetry, Wald zero, contrast rows, d_n = 1 collapse, window count"));
}

// --------------------------------------------------------------------------
// 5: fixtures.

void fixtures(Report& report) {
  Checks c;
  const std::vector<double> v{8.0, 4.0, 2.0, 1.0};
  c.expect(std::abs(evt::hill(v, 2) - 1.5 * std::log(2.0)) <= 1e-12, "hill");
  // Top two X days carry Y = 10 and 7.
  const std::vector<double> x{5, 1, 2, 9, 0}, y{10, -1, 3, 7, 2};
  c.expect(evt::mes_within(x, y, 2) == 8.5, "mes_within");
  c.expect(evt::k_rule(1000) == 227, "k_rule(1000)");
  c.expect(evt::k_rule(500) == 149, "k_rule(500)");
  report.line(5, c.ok, c.summary("hill = (3/2) ln 2, mes_within = 8.5, k_rule 227 / 149"));
}

// --------------------------------------------------------------------------
// 6: chi-square calibration.

void chi2_calibration(Report& report) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (std::size_t d : {2u, 4u, 8u}) {
    std::mt19937_64 gen(600 + d);
    std::normal_distribution<double> z;
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(gen);
    const Eigen::MatrixXd sigma = a * a.transpose() / static_cast<double>(d) + 0.2 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd l = sigma.llt().matrixL();
    std::vector<double> stats(100'000);
    Eigen::VectorXd e(d);
    for (double& s : stats) {
      for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = z(gen);
      const Eigen::VectorXd v = l * e;
      s = *inference::wald_test(std::span<const double>(v.data(), d), sigma, 1.0).statistic;
    }
    const boost::math::chi_squared_distribution<double> chi(static_cast<double>(d - 1));
    const double ks = oracle::ks_statistic(stats, [&](double q) { return boost::math::cdf(chi, q); });
    ok = ok && ks < 0.01;
    detail += "D=" + std::to_string(d) + fmt(" KS %.4f; ", ks);
  }
  const double secs = seconds_since(t0);
  report.line(6, ok && secs <= 60.0, detail + fmt("%.1f s", secs));
}

// --------------------------------------------------------------------------
// 7: oracle cross-validation and the limit integral.

void oracle_cross_validation(Report& report) {
  const dist::BurrParams burr{0.25, 20.0};
  bool agree = true;
  std::string detail;
  for (double p : {0.05, 0.01, 0.001}) {
    const auto c = sim::true_theta_oracle(3.0, 0.95, burr, p, 2'000'000, 71, threads());
    const auto r = sim::rejection_theta_oracle(3.0, 0.95, burr, p, 20'000'000, 72, threads());
    const double z = std::abs(c.theta_p - r.theta_p) / std::hypot(c.mc_error, r.mc_error);
    agree = agree && z <= 3.0;
    detail += fmt("p=%g ", p) + fmt("|diff|/se %.2f; ", z);
  }

  const dist::SymmetricBurr eps(burr);
  const double limit = sim::mes_limit_integral(3.0, 0.95, burr.tail_index());
  const double signed_limit = sim::mes_signed_limit_integral(3.0, 0.95, burr.tail_index());
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  std::string gaps, signed_gaps;
  for (double p : {1e-2, 1e-3, 1e-4}) {
    const double ratio = sim::theta_quadrature(3.0, 0.95, burr, p) / eps.upper_quantile(p);
    const double gap = std::abs(ratio - limit);
    monotone = monotone && gap < prev;
    prev = gap;
    gaps += fmt(" %.2e", gap);
    signed_gaps += fmt(" %.2e", std::abs(ratio - signed_limit));
  }
  report.line(7, agree && monotone,
              detail + "gap to upper-tail limit" + gaps + (monotone ? " (shrinking)" : " (not monotone)") +
                  "; gap to signed limit" + signed_gaps);
}

// --------------------------------------------------------------------------
// 8: tail copula consistency.

void tail_copula_consistency(Report& report) {
  bool ok = true;
  std::string detail;
  const std::size_t n = 100'000;
  const std::size_t k = evt::k_rule(n);
  for (double nu : {3.0, 5.0}) {
    Rng rng(800 + static_cast<int>(nu));
    const Eigen::MatrixXd z = dist::sample_t_scores(dist::bivariate_copula(nu, 0.95), n, rng);
    const double r_hat = tail::r_hat_pair(column(z, 0), column(z, 1), k, k, k).own;
    const double r = dist::tail_copula_R(1.0, 1.0, nu, 0.95);
    const double rel = std::abs(r_hat - r) / r;
    ok = ok && rel < 0.10;
    detail += fmt("nu=%g ", nu) + fmt("R_hat %.4f", r_hat) + fmt(" vs R %.4f", r) + fmt(" (%.1f%%); ", 100 * rel);
  }
  report.line(8, ok, detail + "k = " + std::to_string(k));
}

// --------------------------------------------------------------------------
// 9: pipeline properties.

void pipeline_properties(Report& report) {
  Checks c;

  // Residual scale equivariance of the QMLE.
  {
    dist::InnovationSpec spec;
    spec.marginals.assign(1, dist::BurrParams{0.25, 20.0});
    spec.copula = dist::equicorrelated_copula(3.0, 0.0, 1);
    const Eigen::MatrixXd e = dist::sample_innovations(spec, 3000, 90);
    const garch::GarchParams g{0.001, 0.1, 0.85};
    const garch::GarchParams gs[] = {g};
    const double s0[] = {std::sqrt(g.unconditional_variance())};
    const std::vector<double> y = column(garch::simulate_ccc(gs, e, s0).losses, 0);
    std::vector<double> cy(y);
    for (double& v : cy) v *= 10.0;
    const garch::GarchFit a = garch::qmle_fit(y), b = garch::qmle_fit(cy);
    c.expect(std::abs(b.params.omega / 100.0 - a.params.omega) <= 1e-5 * a.params.omega, "omega scaling");
    c.expect(std::abs(b.params.alpha - a.params.alpha) <= 1e-5, "alpha");
    c.expect(std::abs(b.params.beta - a.params.beta) <= 1e-5, "beta");
    const garch::GarchFit fa[] = {a}, fb[] = {b};
    Eigen::Map<const Eigen::VectorXd> ym(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::Map<const Eigen::VectorXd> cym(cy.data(), static_cast<Eigen::Index>(cy.size()));
    const auto ra = garch::filter_and_residualize(ym, fa, 10);
    const auto rb = garch::filter_and_residualize(cym, fb, 10);
    c.expect((ra.residuals - rb.residuals).cwiseAbs().maxCoeff() <= 1e-6, "residuals");
  }

  // Hill scale invariance and homogeneity of the MES estimators.
  std::mt19937_64 gen(91);
  std::student_t_distribution<double> t(3.0);
  std::vector<double> x(3000), y(3000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = t(gen);
    y[i] = 0.6 * x[i] + t(gen);
  }
  {
    std::vector<double> sy(y);
    for (double& v : sy) v *= 7.5;
    c.expect(std::abs(evt::hill(sy, 200) - evt::hill(y, 200)) <= 1e-12, "hill scale");
    c.expect(std::abs(evt::mes_within(x, sy, 300) - 7.5 * evt::mes_within(x, y, 300)) <=
                 1e-12 * std::abs(evt::mes_within(x, sy, 300)),
             "mes homogeneity");
  }

  // Rank invariance of R_hat.
  {
    std::vector<double> tx(x);
    for (double& v : tx) v = std::exp(v) * 3.0 + std::atan(v);
    const auto a = tail::r_hat_pair(x, y, 150, 120, 180);
    const auto b = tail::r_hat_pair(tx, y, 150, 120, 180);
    c.expect(a.own == b.own && a.swapped == b.swapped, "rank invariance");
  }

  // No look-ahead: truncating right after a record's date reproduces it.
  backtest::SyntheticPanelSpec s;
  s.rows = 1040;
  s.seed = 93;
  s.innovations.marginals.assign(3, dist::BurrParams{0.25, 20.0});
  s.innovations.copula = dist::equicorrelated_copula(3.0, 0.5, 3);
  s.garch.assign(3, garch::GarchParams{0.001, 0.1, 0.85});
  s.caps = {1.0, 2.0, 3.0};
  s.cap_drift = 0.5;
  const auto panel = backtest::synthetic_panel(s);
  {
    const auto recs = backtest::rolling_forecast(panel, backtest::BacktestOptions{});
    for (std::size_t i : {0u, 17u}) {
      const auto it = std::find(panel.dates.begin(), panel.dates.end(), recs[i].date);
      const auto rows = static_cast<std::size_t>(it - panel.dates.begin()) + 1;
      const auto cut = backtest::rolling_forecast(panel.head(rows), backtest::BacktestOptions{});
      bool same = cut.size() == i + 1 && cut.back().date == recs[i].date &&
                  cut.back().wald.statistic == recs[i].wald.statistic && cut.back().flags == recs[i].flags;
      for (std::size_t j = 0; same && j < 3; ++j)
        same = cut.back().series[j].theta == recs[i].series[j].theta &&
               cut.back().series[j].weight == recs[i].series[j].weight;
      c.expect(same, "no look-ahead");
    }
  }

  // Deterministic re-runs from manifests.
  {
    oracle::TempDir dir("acceptance");
    std::ofstream(dir.file("s.cfg")) << "n = 300\nml = false\np_grid = 0.001, 0.0001\nreplications = 4\n"
                                        "oracle_draws = 1000000\n";
    std::ostringstream csv;
    backtest::write_price_csv(csv, panel);
    std::ofstream(dir.file("panel.csv")) << csv.str();
    const bool ran = run_cli({"simulate", "--config", dir.file("s.cfg"), "--out", dir.file("a.csv")}) == 0 &&
                     run_cli({"simulate", "--config", dir.file("a.csv.manifest.json"), "--out", dir.file("b.csv")}) == 0 &&
                     run_cli({"forecast", dir.file("panel.csv"), "--out", dir.file("f.csv")}) == 0 &&
                     run_cli({"forecast", "--config", dir.file("f.csv.manifest.json"), "--out", dir.file("g.csv")}) == 0;
    c.expect(ran, "cli runs");
    c.expect(ran && !slurp(dir.file("a.csv")).empty() && slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")),
             "simulate manifest");
    c.expect(ran && !slurp(dir.file("f.csv")).empty() && slurp(dir.file("f.csv")) == slurp(dir.file("g.csv")) &&
                 slurp(dir.file("f.csv.sigma.csv")) == slurp(dir.file("g.csv.sigma.csv")),
             "forecast manifest");
  }

  report.line(9, c.ok,
              c.summary("QMLE scale equivariance, Hill scale invariance, R_hat rank invariance, no look-ahead, "
                        "manifest re-runs"));
}

// --------------------------------------------------------------------------
// 10: structural backtest substitute.

void backtest_substitute(Report& report) {
  const std::size_t dim = 8;
  const backtest::BacktestOptions options;  // n = 1000, ell_n = 10, p = 1e-4

  // Heterogeneous: tail indices spread over [0.1, 0.38], uneven caps.
  backtest::SyntheticPanelSpec het;
  het.rows = 1100;
  het.seed = 1001;
  for (std::size_t j = 0; j < dim; ++j) {
    const double gamma = 0.1 + 0.04 * static_cast<double>(j);
    het.innovations.marginals.push_back(dist::BurrParams{1.0 / (20.0 * gamma), 20.0});
    het.caps.push_back(1.0 + 0.5 * static_cast<double>(j % 3));
  }
  het.innovations.copula = dist::equicorrelated_copula(3.0, 0.0, dim);
  het.garch.assign(dim, garch::GarchParams{0.001, 0.1, 0.85});
  const auto recs = backtest::rolling_forecast(backtest::synthetic_panel(het), options);
  std::size_t rejected = 0;
  for (const auto& r : recs)
    if (r.wald.p_value && *r.wald.p_value < 0.01) ++rejected;
  const double share = static_cast<double>(rejected) / static_cast<double>(recs.size());

  // Homogeneous null: independent i.i.d. panels (constant volatility, equal
  // tails and caps), one window each, so the p-values are independent.
  std::vector<double> pvalues;
  std::size_t skipped = 0;
  for (std::size_t r = 0; r < 200; ++r) {
    backtest::SyntheticPanelSpec hom;
    hom.rows = options.n + options.ell_n + 1;
    hom.seed = 5000 + r;
    hom.innovations.marginals.assign(dim, dist::BurrParams{0.25, 20.0});
    hom.innovations.copula = dist::equicorrelated_copula(3.0, 0.0, dim);
    hom.garch.assign(dim, garch::GarchParams{1.0, 0.0, 0.0});
    hom.caps.assign(dim, 1.0);
    const auto rec = backtest::rolling_forecast(backtest::synthetic_panel(hom), options);
    if (rec.at(0).wald.p_value)
      pvalues.push_back(*rec[0].wald.p_value);
    else
      ++skipped;
  }
  const double ks = oracle::ks_statistic(pvalues, [](double u) { return std::clamp(u, 0.0, 1.0); });

  report.line(10, share >= 0.95 && ks < 0.1 && pvalues.size() >= 190,
              "heterogeneous: " + std::to_string(rejected) + "/" + std::to_string(recs.size()) +
                  fmt(" windows with p < 0.01 (%.1f%%, need >= 95%%)", 100 * share) +
                  "; homogeneous: KS " + fmt("%.3f", ks) + " over " + std::to_string(pvalues.size()) +
                  " windows (need < 0.1), skipped " + std::to_string(skipped));
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria, e.g. `tailmes_acceptance 4 5 10`;
  // 1, 2 and 3 share one simulation run.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto want = [&](std::initializer_list<int> ids) {
    if (only.empty()) return true;
    for (int id : ids)
      if (std::find(only.begin(), only.end(), id) != only.end()) return true;
    return false;
  };
  Report report;
  const std::vector<std::pair<std::initializer_list<int>, std::function<void(Report&)>>> steps{
      {{4}, algebraic_invariants},  {{5}, fixtures},
      {{6}, chi2_calibration},      {{7}, oracle_cross_validation},
      {{8}, tail_copula_consistency}, {{9}, pipeline_properties},
      {{10}, backtest_substitute},  {{1, 2, 3}, simulation_designs}};
  for (const auto& [ids, step] : steps) {
    if (!want(ids)) continue;
    try {
      step(report);
    } catch (const std::exception& e) {
      std::printf("criterion %d: FAIL  exception: %s\n", *ids.begin(), e.what());
      ++report.failures;
    }
  }
  std::printf("%s: %d failing\n", report.failures == 0 ? "ALL PASS" : "SOME FAIL", report.failures);
  return report.failures == 0 ? 0 : 1;
}
