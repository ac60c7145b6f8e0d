#pragma once

// Monte Carlo laboratory: CCC-GARCH data with t-copula / Burr innovations,
// the per-replication estimation pipeline, comparison estimators and the
// true-MES oracles the coverage statistics are measured against.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tailmes/distributions.hpp"
#include "tailmes/garch.hpp"
#include "tailmes/kv_config.hpp"

namespace tailmes::sim {

// ---------------------------------------------------------------------------
// True MES of the innovations, theta_p = E[eps_Y | eps_X > F_X^{-1}(1 - p)].

struct TrueMes {
  double theta_p = 0.0;
  double mc_error = 0.0;  // 0 for deterministic methods
  std::string method;
  std::size_t draws = 0;
};

// Conditional Monte Carlo: U_X ~ Uniform(1 - p, 1), U_Y | U_X from the t
// copula conditional law, eps_Y through the symmetrized Burr quantile.
// Draws are split into fixed chunks with derived seeds so the result does not
// depend on `threads`.
TrueMes true_theta_oracle(double nu, double rho, const dist::BurrParams& burr, double p,
                          std::size_t draws, std::uint64_t rng_seed, std::size_t threads = 1);

// Rejection sampling: full copula pairs, keep those with U_X > 1 - p.
TrueMes rejection_theta_oracle(double nu, double rho, const dist::BurrParams& burr, double p,
                               std::size_t draws, std::uint64_t rng_seed, std::size_t threads = 1);

// Deterministic double-exponential quadrature of the same conditional mean.
double theta_quadrature(double nu, double rho, const dist::BurrParams& burr, double p);

// integral_0^inf R(1, y^{-1/gamma}) dy: the upper-tail part of the limit of
// theta_p / U_1(1/p) as p -> 0.
double mes_limit_integral(double nu, double rho, double gamma);

// The full limit for symmetric margins under a t copula. Large X also drags a
// non-vanishing share of Y into its lower tail (the tail copula of (X, -Y) is
// R with -rho), so that part is subtracted.
double mes_signed_limit_integral(double nu, double rho, double gamma);

// ---------------------------------------------------------------------------
// Parametric comparison estimator.

struct BurrFit {
  dist::BurrParams params;
  double loglik = 0.0;
  bool converged = false;
};

// ML fit of (a, b) to |eps| under eps = R B / sqrt(E B^2).
BurrFit fit_symmetric_burr(std::span<const double> magnitudes);

struct CopulaFit {
  double nu = 0.0;
  double rho = 0.0;
  double loglik = 0.0;
  bool converged = false;
};

// ML fit of the bivariate t copula on rank pseudo-observations r / (n + 1).
CopulaFit fit_t_copula(std::span<const double> x, std::span<const double> y);

struct MlFit {
  BurrFit marginal;
  CopulaFit copula;
  bool converged() const noexcept { return marginal.converged && copula.converged; }
};

// Marginal fit on the pooled magnitudes of both columns, copula fit on their ranks.
MlFit fit_ml_model(std::span<const double> res_x, std::span<const double> res_y);

// theta_p implied by the fitted model (columns 0 = X, 1 = Y). Needs >= 200 rows.
// Throws DomainError when either ML fit fails to converge.
double ml_estimator(const garch::ResidualPanel& residuals, double p);

// ---------------------------------------------------------------------------
// Study configuration and pipeline.

struct SimConfig {
  std::size_t n = 1000;
  std::size_t ell_n = 10;
  std::vector<double> p_grid{0.01, 0.005, 0.001, 0.0005, 0.0001, 0.00005, 0.00001};
  double nu = 3.0;
  double rho = 0.95;
  dist::BurrParams burr{0.25, 20.0};
  std::size_t replications = 1000;
  std::uint64_t base_seed = 20240101;
  garch::GarchParams garch_x{0.001, 0.2, 0.75};
  garch::GarchParams garch_y{0.001, 0.1, 0.85};
  double iota = 0.05;
  std::size_t burn_in = 500;
  std::size_t oracle_draws = 10'000'000;
  bool ml_enabled = true;

  // Throws ConfigError naming the offending field.
  void validate() const;

  static SimConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  std::string to_text() const;
};

// True theta_p per grid level, computed once per study.
using OracleTable = std::map<double, TrueMes>;
OracleTable build_oracle_table(const SimConfig& config, std::size_t threads = 1);

struct ReplicationRecord {
  double p = 0.0;
  std::size_t rep_index = 0;
  bool failed = false;
  std::string failure;  // empty unless failed

  double theta_hat = 0.0;  // sigma_hat_{n+1,Y} * theta_hat_p
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double theta_true = 0.0;  // sigma_{n+1,Y} * theta_p
  bool hit = false;
  double gamma_hat = 0.0;
  double sigma_hat = 0.0;
  double sigma_true = 0.0;
  double theta_np = 0.0;
  std::optional<double> theta_ml;
};

// All grid levels of one replication; the data and fits are shared across p.
std::vector<ReplicationRecord> run_replication_grid(const SimConfig& config, std::size_t rep_index,
                                                    const OracleTable& oracle);
ReplicationRecord run_replication(const SimConfig& config, double p, std::size_t rep_index,
                                  const OracleTable& oracle);

struct SimRow {
  double p = 0.0;
  double bias = 0.0;  // all metrics x100
  double rmse = 0.0;
  double rmse_ml = 0.0;
  double rmse_np = 0.0;
  double mean_length = 0.0;
  double coverage = 0.0;
  std::size_t used = 0;
  std::size_t failed = 0;
  std::size_t ml_used = 0;
  std::size_t gamma_out_of_range = 0;  // Hill estimate outside (0, 1/2)
  double theta_p_true = 0.0;
};

struct SimResult {
  std::vector<SimRow> rows;
  std::size_t replications = 0;
  std::size_t failed_replications = 0;
  std::map<std::string, std::size_t> failure_reasons;
};

// Aggregates replications across `threads` workers. Throws if every replication failed.
SimResult run_study(const SimConfig& config, std::size_t threads = 1,
                    const OracleTable* oracle = nullptr);
SimResult aggregate(const SimConfig& config, const std::vector<std::vector<ReplicationRecord>>& reps,
                    const OracleTable& oracle);

// One row per grid level: full precision metrics followed by the one-decimal
// presentation values used in printed tables.
void write_result_csv(std::ostream& out, const SimConfig& config, const SimResult& result);

}  // namespace tailmes::sim
