#include "tailmes/simlab.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "tailmes/error.hpp"
#include "tailmes/evt.hpp"
#include "tailmes/numeric.hpp"
#include "tailmes/rng.hpp"

namespace tailmes::sim {

namespace {

constexpr std::size_t kOracleChunk = 1'000'000;
constexpr std::uint64_t kOracleSeed = 0x6f7261636c65ULL;

void check_oracle_args(double nu, double rho, const dist::BurrParams& burr, double p,
                       std::size_t draws) {
  if (!(nu > 0.0)) throw DomainError("oracle: nu must be positive");
  if (!(rho > -1.0 && rho < 1.0)) throw DomainError("oracle: rho must lie in (-1,1)");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("oracle: p must lie in (0,1)");
  if (draws < kOracleChunk) throw DomainError("oracle: at least 1e6 draws required");
  burr.validate();
}

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
};

// Uniform on (0, 1]; avoids quantile calls at exactly 0.
double open_uniform(Rng& rng) {
  return 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// t_{nu}^{-1}(v) without losing digits for v close to 1.
double t_quantile_any(double v, double one_minus_v, double nu) {
  return v < 0.5 ? dist::t_quantile(v, nu) : dist::t_upper_quantile(one_minus_v, nu);
}

double conditional_scale(double tx, double nu, double rho) {
  return std::sqrt((nu + tx * tx) * (1.0 - rho * rho) / (nu + 1.0));
}

TrueMes finish(const std::vector<Moments>& chunks, std::string method, std::size_t draws) {
  Moments total;
  for (const auto& c : chunks) {
    total.sum += c.sum;
    total.sum_sq += c.sum_sq;
    total.count += c.count;
  }
  if (total.count < 2) throw DomainError(method + ": too few effective draws");
  const double n = static_cast<double>(total.count);
  const double mean = total.sum / n;
  const double var = std::max(0.0, (total.sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), std::move(method), draws};
}

}  // namespace

TrueMes true_theta_oracle(double nu, double rho, const dist::BurrParams& burr, double p,
                          std::size_t draws, std::uint64_t rng_seed, std::size_t threads) {
  check_oracle_args(nu, rho, burr, p, draws);
  const dist::SymmetricBurr margin(burr);
  const std::size_t chunks = (draws + kOracleChunk - 1) / kOracleChunk;
  std::vector<Moments> parts(chunks);
  numeric::parallel_for(chunks, threads, [&](std::size_t c) {
    Rng rng(derive_seed(rng_seed, c));
    const std::size_t count = std::min(kOracleChunk, draws - c * kOracleChunk);
    Moments m;
    for (std::size_t i = 0; i < count; ++i) {
      // U_X = 1 - p*s, expressed through its t score.
      const double tx = dist::t_upper_quantile(p * open_uniform(rng), nu);
      const double v = open_uniform(rng);
      const double q = t_quantile_any(v, 1.0 - v, nu + 1.0);
      const double ty = rho * tx + conditional_scale(tx, nu, rho) * q;
      const double eps = margin.from_t_score(ty, nu);
      m.sum += eps;
      m.sum_sq += eps * eps;
    }
    m.count = count;
    parts[c] = m;
  });
  return finish(parts, "conditional-mc", draws);
}

TrueMes rejection_theta_oracle(double nu, double rho, const dist::BurrParams& burr, double p,
                               std::size_t draws, std::uint64_t rng_seed, std::size_t threads) {
  check_oracle_args(nu, rho, burr, p, draws);
  const dist::SymmetricBurr margin(burr);
  const auto copula = dist::bivariate_copula(nu, rho);
  const double threshold = dist::t_upper_quantile(p, nu);
  const std::size_t chunks = (draws + kOracleChunk - 1) / kOracleChunk;
  std::vector<Moments> parts(chunks);
  numeric::parallel_for(chunks, threads, [&](std::size_t c) {
    Rng rng(derive_seed(rng_seed, c));
    const std::size_t count = std::min(kOracleChunk, draws - c * kOracleChunk);
    const Eigen::MatrixXd scores = dist::sample_t_scores(copula, count, rng);
    Moments m;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      if (!(scores(i, 0) > threshold)) continue;
      const double eps = margin.from_t_score(scores(i, 1), nu);
      m.sum += eps;
      m.sum_sq += eps * eps;
      ++m.count;
    }
    parts[c] = m;
  });
  return finish(parts, "rejection", draws);
}

double theta_quadrature(double nu, double rho, const dist::BurrParams& burr, double p) {
  if (!(nu > 0.0)) throw DomainError("theta_quadrature: nu must be positive");
  if (!(rho > -1.0 && rho < 1.0)) throw DomainError("theta_quadrature: rho must lie in (-1,1)");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("theta_quadrature: p must lie in (0,1)");
  const dist::SymmetricBurr margin(burr);
  static const numeric::UnitIntervalRule rule(1.0 / 16.0);
  // Same expectation as the conditional Monte Carlo oracle, written as a
  // double integral over (s, v) in the unit square. The inner integrand has
  // a cusp where the t score crosses zero (the Burr quantile behaves like
  // |u - 1/2|^(1/b) there), so the v range is split at that point.
  return rule.integrate([&](double s, double) {
    const double tx = dist::t_upper_quantile(p * s, nu);
    const double loc = rho * tx;
    const double scale = conditional_scale(tx, nu, rho);
    const double v0 = dist::t_cdf(-loc / scale, nu + 1.0);
    const double v0c = dist::t_cdf(loc / scale, nu + 1.0);
    auto eps = [&](double v, double one_minus_v) {
      return margin.from_t_score(loc + scale * t_quantile_any(v, one_minus_v, nu + 1.0), nu);
    };
    const double below = rule.integrate([&](double w, double wc) { return eps(v0 * w, v0c + v0 * wc); });
    const double above = rule.integrate([&](double w, double wc) { return eps(v0 + v0c * w, v0c * wc); });
    return v0 * below + v0c * above;
  });
}

double mes_limit_integral(double nu, double rho, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("mes_limit_integral: gamma must lie in (0,1)");
  static const numeric::HalfLineRule rule(1.0 / 32.0);
  return rule.integrate(
      [&](double y) { return dist::tail_copula_R(1.0, std::pow(y, -1.0 / gamma), nu, rho); });
}

double mes_signed_limit_integral(double nu, double rho, double gamma) {
  return mes_limit_integral(nu, rho, gamma) - mes_limit_integral(nu, -rho, gamma);
}

// ---------------------------------------------------------------------------

namespace {

double log1p_exp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double burr_magnitude_loglik(const std::vector<double>& log_m, double sum_log_m, double a,
                             double b) {
  const dist::BurrParams params{a, b};
  if (!(a > 0.0 && b > 0.0 && a * b > 2.0)) return -std::numeric_limits<double>::infinity();
  const double log_c = 0.5 * std::log(dist::burr_moment(2.0, params));
  const double n = static_cast<double>(log_m.size());
  double tail = 0.0;
  for (double lm : log_m) tail += log1p_exp(b * (log_c + lm));
  return n * (log_c + std::log(a) + std::log(b)) + (b - 1.0) * (n * log_c + sum_log_m) -
         (a + 1.0) * tail;
}

// Ranks 1..n (ties broken by position).
std::vector<std::size_t> ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<std::size_t> r(values.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) r[order[pos]] = pos + 1;
  return r;
}

}  // namespace

BurrFit fit_symmetric_burr(std::span<const double> magnitudes) {
  std::vector<double> log_m;
  log_m.reserve(magnitudes.size());
  for (double m : magnitudes) {
    const double a = std::abs(m);
    if (!std::isfinite(a)) throw DataError("fit_symmetric_burr: non-finite magnitude");
    if (a > 0.0) log_m.push_back(std::log(a));
  }
  if (log_m.size() < 50) throw DomainError("fit_symmetric_burr: need at least 50 nonzero magnitudes");
  const double sum_log_m = std::accumulate(log_m.begin(), log_m.end(), 0.0);

  std::vector<double> abs_values;
  abs_values.reserve(log_m.size());
  for (double lm : log_m) abs_values.push_back(std::exp(lm));
  const double gamma0 =
      std::clamp(evt::hill(abs_values, evt::k_rule(abs_values.size())), 0.05, 0.45);

  auto objective = [&](const std::vector<double>& z) {
    return -burr_magnitude_loglik(log_m, sum_log_m, std::exp(z[0]), std::exp(z[1]));
  };
  std::vector<double> best{std::log(1.0 / (gamma0 * 2.0)), std::log(2.0)};
  double best_value = objective(best);
  for (double b : {4.0, 8.0, 16.0, 32.0, 64.0}) {
    const std::vector<double> z{std::log(1.0 / (gamma0 * b)), std::log(b)};
    const double v = objective(z);
    if (v < best_value) {
      best = z;
      best_value = v;
    }
  }
  numeric::SimplexOptions options;
  options.max_evaluations = 2000;
  options.f_tolerance = 1e-12;
  options.x_tolerance = 1e-7;
  auto first = numeric::nelder_mead(objective, best, {0.3, 0.3}, options);
  // A restart guards against a collapsed simplex.
  auto second = numeric::nelder_mead(objective, first.x, {0.05, 0.05}, options);
  BurrFit fit;
  fit.params = {std::exp(second.x[0]), std::exp(second.x[1])};
  fit.loglik = -second.value;
  fit.converged = second.converged && std::isfinite(second.value);
  return fit;
}

CopulaFit fit_t_copula(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit_t_copula: length mismatch");
  const std::size_t n = x.size();
  if (n < 50) throw DomainError("fit_t_copula: need at least 50 pairs");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DataError("fit_t_copula: non-finite value");
  const auto rx = ranks(x);
  const auto ry = ranks(y);

  std::vector<double> q(n + 1), tx(n), ty(n), sq(n), cross(n);
  const double np1 = static_cast<double>(n + 1);

  // Profile log-likelihood in rho for fixed nu; fills `rho_out`.
  auto profile = [&](double nu, double& rho_out) {
    for (std::size_t r = 1; r <= n; ++r) {
      const std::size_t mirror = n + 1 - r;
      if (mirror < r) {
        q[r] = -q[mirror];
      } else {
        q[r] = dist::t_quantile(static_cast<double>(r) / np1, nu);
      }
    }
    double marginal = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      tx[i] = q[rx[i]];
      ty[i] = q[ry[i]];
      sq[i] = tx[i] * tx[i] + ty[i] * ty[i];
      cross[i] = tx[i] * ty[i];
      marginal += std::log1p(tx[i] * tx[i] / nu) + std::log1p(ty[i] * ty[i] / nu);
    }
    const double dn = static_cast<double>(n);
    const double c1 = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                      0.5 * std::log(nu * std::numbers::pi);
    const double c2 = std::lgamma(0.5 * (nu + 2.0)) - std::lgamma(0.5 * nu) -
                      std::log(nu * std::numbers::pi);
    auto loglik = [&](double rho) {
      const double one_m = 1.0 - rho * rho;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::log1p((sq[i] - 2.0 * rho * cross[i]) / (nu * one_m));
      return dn * (c2 - 0.5 * std::log(one_m)) - 0.5 * (nu + 2.0) * s -
             (dn * 2.0 * c1 - 0.5 * (nu + 1.0) * marginal);
    };
    const auto best = numeric::brent_minimize([&](double rho) { return -loglik(rho); }, -0.999,
                                              0.999, 1e-7, 200);
    rho_out = best.x;
    return -best.value;
  };

  const double lo = std::log(0.8);
  const double hi = std::log(200.0);
  double rho_at = 0.0;
  const auto outer = numeric::brent_minimize(
      [&](double log_nu) { return -profile(std::exp(log_nu), rho_at); }, lo, hi, 1e-5, 200);
  CopulaFit fit;
  fit.nu = std::exp(outer.x);
  fit.loglik = profile(fit.nu, rho_at);
  fit.rho = rho_at;
  fit.converged = std::isfinite(fit.loglik) && std::abs(fit.rho) < 0.9985;
  return fit;
}

MlFit fit_ml_model(std::span<const double> res_x, std::span<const double> res_y) {
  std::vector<double> pooled(res_x.begin(), res_x.end());
  pooled.insert(pooled.end(), res_y.begin(), res_y.end());
  MlFit fit;
  fit.marginal = fit_symmetric_burr(pooled);
  fit.copula = fit_t_copula(res_x, res_y);
  return fit;
}

double ml_estimator(const garch::ResidualPanel& residuals, double p) {
  if (residuals.margins() < 2) throw DomainError("ml_estimator: need two residual columns");
  if (residuals.rows() < 200) throw DomainError("ml_estimator: need at least 200 residual rows");
  const auto fit = fit_ml_model(residuals.column(0), residuals.column(1));
  if (!fit.converged()) throw DomainError("ml_estimator: maximum likelihood fit did not converge");
  return theta_quadrature(fit.copula.nu, fit.copula.rho, fit.marginal.params, p);
}

// ---------------------------------------------------------------------------

namespace {

void validate_garch(const garch::GarchParams& g, const std::string& field) {
  if (!(g.omega > 0.0)) throw ConfigError(field + ".omega", "must be positive");
  if (!(g.alpha >= 0.0)) throw ConfigError(field + ".alpha", "must be nonnegative");
  if (!(g.beta >= 0.0)) throw ConfigError(field + ".beta", "must be nonnegative");
  if (!(g.persistence() < 1.0)) throw ConfigError(field, "alpha + beta must be below 1");
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "n",           "ell_n",         "p_grid",        "nu",          "rho",
      "replications", "seed",         "iota",          "burn_in",     "oracle_draws",
      "ml",           "burr.a",       "burr.b",        "garch_x.omega", "garch_x.alpha",
      "garch_x.beta", "garch_y.omega", "garch_y.alpha", "garch_y.beta"};
  return keys;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_double(values[i]);
  }
  return out;
}

garch::GarchParams read_garch(const KeyValueConfig& kv, const std::string& section,
                              garch::GarchParams g) {
  g.omega = kv.get_double(section + ".omega", g.omega);
  g.alpha = kv.get_double(section + ".alpha", g.alpha);
  g.beta = kv.get_double(section + ".beta", g.beta);
  return g;
}

}  // namespace

void SimConfig::validate() const {
  if (replications < 1) throw ConfigError("replications", "must be at least 1");
  if (n < 50) throw ConfigError("n", "must be at least 50");
  if (ml_enabled && n < 200) throw ConfigError("n", "the ML comparison needs n >= 200 (or ml = false)");
  if (ell_n >= n) throw ConfigError("ell_n", "must be smaller than n");
  if (p_grid.empty()) throw ConfigError("p_grid", "must not be empty");
  const double k = static_cast<double>(evt::k_rule(n));
  for (double p : p_grid) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("p_grid", "levels must lie in (0,1)");
    if (k / (static_cast<double>(n) * p) < 1.0)
      throw ConfigError("p_grid", "level " + format_double(p) +
                                      " violates d_n = k/(n p) >= 1 for k = k_rule(n)");
  }
  if (std::set<double>(p_grid.begin(), p_grid.end()).size() != p_grid.size())
    throw ConfigError("p_grid", "levels must be distinct");
  if (!(nu > 0.0)) throw ConfigError("nu", "must be positive");
  if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("rho", "must lie in (-1,1)");
  if (!(burr.a > 0.0)) throw ConfigError("burr.a", "must be positive");
  if (!(burr.b > 0.0)) throw ConfigError("burr.b", "must be positive");
  if (!(burr.a * burr.b > 2.0)) throw ConfigError("burr", "a*b must exceed 2 (finite variance)");
  validate_garch(garch_x, "garch_x");
  validate_garch(garch_y, "garch_y");
  if (!(iota > 0.0 && iota < 1.0)) throw ConfigError("iota", "must lie in (0,1)");
  if (oracle_draws < kOracleChunk) throw ConfigError("oracle_draws", "must be at least 1000000");
}

SimConfig SimConfig::from_kv(const KeyValueConfig& kv) {
  const auto unknown = kv.unknown_keys(known_keys());
  if (!unknown.empty()) throw ConfigError(unknown.front(), "unknown configuration key");
  SimConfig c;
  c.n = kv.get_size("n", c.n);
  c.ell_n = kv.get_size("ell_n", c.ell_n);
  c.p_grid = kv.get_doubles("p_grid", c.p_grid);
  c.nu = kv.get_double("nu", c.nu);
  c.rho = kv.get_double("rho", c.rho);
  c.replications = kv.get_size("replications", c.replications);
  c.base_seed = kv.get_u64("seed", c.base_seed);
  c.iota = kv.get_double("iota", c.iota);
  c.burn_in = kv.get_size("burn_in", c.burn_in);
  c.oracle_draws = kv.get_size("oracle_draws", c.oracle_draws);
  c.ml_enabled = kv.get_bool("ml", c.ml_enabled);
  c.burr.a = kv.get_double("burr.a", c.burr.a);
  c.burr.b = kv.get_double("burr.b", c.burr.b);
  c.garch_x = read_garch(kv, "garch_x", c.garch_x);
  c.garch_y = read_garch(kv, "garch_y", c.garch_y);
  c.validate();
  return c;
}

KeyValueConfig SimConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("n", std::to_string(n));
  kv.set("ell_n", std::to_string(ell_n));
  kv.set("p_grid", join_doubles(p_grid));
  kv.set("nu", format_double(nu));
  kv.set("rho", format_double(rho));
  kv.set("replications", std::to_string(replications));
  kv.set("seed", std::to_string(base_seed));
  kv.set("iota", format_double(iota));
  kv.set("burn_in", std::to_string(burn_in));
  kv.set("oracle_draws", std::to_string(oracle_draws));
  kv.set("ml", ml_enabled ? "true" : "false");
  kv.set("burr.a", format_double(burr.a));
  kv.set("burr.b", format_double(burr.b));
  for (const auto& [name, g] : {std::pair{"garch_x", garch_x}, std::pair{"garch_y", garch_y}}) {
    const std::string s(name);
    kv.set(s + ".omega", format_double(g.omega));
    kv.set(s + ".alpha", format_double(g.alpha));
    kv.set(s + ".beta", format_double(g.beta));
  }
  return kv;
}

std::string SimConfig::to_text() const {
  const auto kv = to_kv();
  std::ostringstream top;
  std::map<std::string, std::ostringstream> sections;
  for (const auto& key : known_keys()) {
    const auto value = kv.get(key);
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      top << key << " = " << *value << '\n';
    } else {
      sections[key.substr(0, dot)] << key.substr(dot + 1) << " = " << *value << '\n';
    }
  }
  std::string out = top.str();
  for (const auto& name : {"burr", "garch_x", "garch_y"})
    out += "\n[" + std::string(name) + "]\n" + sections[name].str();
  return out;
}

OracleTable build_oracle_table(const SimConfig& config, std::size_t threads) {
  OracleTable table;
  for (double p : config.p_grid) {
    // Seeded from the design only, so studies that differ in n or base seed
    // measure against the same truth.
    const std::uint64_t seed = derive_seed(kOracleSeed, std::bit_cast<std::uint64_t>(p));
    table.emplace(p, true_theta_oracle(config.nu, config.rho, config.burr, p, config.oracle_draws,
                                       seed, threads));
  }
  return table;
}

std::vector<ReplicationRecord> run_replication_grid(const SimConfig& config, std::size_t rep_index,
                                                    const OracleTable& oracle) {
  std::vector<ReplicationRecord> records(config.p_grid.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].p = config.p_grid[i];
    records[i].rep_index = rep_index;
  }
  auto fail_all = [&](const std::string& reason) {
    for (auto& r : records) {
      r.failed = true;
      r.failure = reason;
    }
    return records;
  };

  Rng rng(derive_seed(config.base_seed, rep_index));
  const dist::InnovationSpec spec{{config.burr, config.burr},
                                  dist::bivariate_copula(config.nu, config.rho)};
  const std::size_t total = config.burn_in + config.n + config.ell_n;
  const Eigen::MatrixXd innovations = dist::sample_innovations(spec, total, rng);
  const std::array<garch::GarchParams, 2> params{config.garch_x, config.garch_y};
  const std::array<double, 2> sigma0{std::sqrt(config.garch_x.unconditional_variance()),
                                     std::sqrt(config.garch_y.unconditional_variance())};
  const auto path = garch::simulate_ccc(params, innovations, sigma0);
  const Eigen::MatrixXd losses = path.losses.bottomRows(
      static_cast<Eigen::Index>(config.n + config.ell_n));
  const double sigma_true = std::sqrt(path.next_variance(1));

  std::vector<garch::GarchFit> fits;
  try {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const Eigen::VectorXd column = losses.col(j);
      fits.push_back(garch::qmle_fit({column.data(), static_cast<std::size_t>(column.size())}));
    }
  } catch (const std::exception& e) {
    return fail_all(std::string("qmle: ") + e.what());
  }
  for (const auto& f : fits)
    if (!f.converged) return fail_all("qmle: not converged");

  const auto panel = garch::filter_and_residualize(losses, fits, config.ell_n);
  const double sigma_hat = fits[1].vol_forecast();
  const auto res_x = panel.column(0);
  const auto res_y = panel.column(1);

  std::optional<MlFit> ml;
  if (config.ml_enabled) {
    try {
      auto fit = fit_ml_model(res_x, res_y);
      if (fit.converged()) ml = fit;
    } catch (const std::exception&) {
      // Treated like non-convergence: excluded from the ML column only.
    }
  }

  for (auto& record : records) {
    try {
      const auto cfg = evt::TailConfig::from_rule(panel.rows(), record.p);
      const auto forecast = evt::forecast_mes(res_x, res_y, sigma_hat, cfg, config.iota);
      const auto it = oracle.find(record.p);
      if (it == oracle.end()) throw DomainError("no oracle value for p = " + format_double(record.p));
      record.theta_hat = forecast.theta_hat_np_level;
      record.ci_lower = forecast.ci_lower;
      record.ci_upper = forecast.ci_upper;
      record.gamma_hat = forecast.gamma_hat;
      record.sigma_hat = sigma_hat;
      record.sigma_true = sigma_true;
      record.theta_true = sigma_true * it->second.theta_p;
      record.hit = record.ci_lower <= record.theta_true && record.theta_true <= record.ci_upper;
      record.theta_np = sigma_hat * evt::mes_np(res_x, res_y, record.p);
      if (ml)
        record.theta_ml =
            sigma_hat * theta_quadrature(ml->copula.nu, ml->copula.rho, ml->marginal.params, record.p);
    } catch (const std::exception& e) {
      record.failed = true;
      record.failure = std::string("estimation: ") + e.what();
    }
  }
  return records;
}

ReplicationRecord run_replication(const SimConfig& config, double p, std::size_t rep_index,
                                  const OracleTable& oracle) {
  SimConfig single = config;
  single.p_grid = {p};
  return run_replication_grid(single, rep_index, oracle).front();
}

SimResult aggregate(const SimConfig& config, const std::vector<std::vector<ReplicationRecord>>& reps,
                    const OracleTable& oracle) {
  SimResult result;
  result.replications = reps.size();
  for (const auto& grid : reps) {
    const auto failed = std::find_if(grid.begin(), grid.end(), [](const auto& r) { return r.failed; });
    if (failed != grid.end()) {
      ++result.failed_replications;
      ++result.failure_reasons[failed->failure];
    }
  }
  for (std::size_t i = 0; i < config.p_grid.size(); ++i) {
    SimRow row;
    row.p = config.p_grid[i];
    if (const auto it = oracle.find(row.p); it != oracle.end()) row.theta_p_true = it->second.theta_p;
    double err = 0.0, sq = 0.0, sq_np = 0.0, sq_ml = 0.0, length = 0.0, hits = 0.0;
    for (const auto& grid : reps) {
      const auto& r = grid.at(i);
      if (r.failed) {
        ++row.failed;
        continue;
      }
      ++row.used;
      const double e = r.theta_hat - r.theta_true;
      err += e;
      sq += e * e;
      sq_np += (r.theta_np - r.theta_true) * (r.theta_np - r.theta_true);
      if (r.theta_ml) {
        ++row.ml_used;
        sq_ml += (*r.theta_ml - r.theta_true) * (*r.theta_ml - r.theta_true);
      }
      length += r.ci_upper - r.ci_lower;
      hits += r.hit ? 1.0 : 0.0;
      if (!(r.gamma_hat > 0.0 && r.gamma_hat < 0.5)) ++row.gamma_out_of_range;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double used = static_cast<double>(row.used);
    row.bias = row.used ? 100.0 * err / used : nan;
    row.rmse = row.used ? 100.0 * std::sqrt(sq / used) : nan;
    row.rmse_np = row.used ? 100.0 * std::sqrt(sq_np / used) : nan;
    row.rmse_ml = row.ml_used ? 100.0 * std::sqrt(sq_ml / static_cast<double>(row.ml_used)) : nan;
    row.mean_length = row.used ? 100.0 * length / used : nan;
    row.coverage = row.used ? 100.0 * hits / used : nan;
    result.rows.push_back(row);
  }
  return result;
}

SimResult run_study(const SimConfig& config, std::size_t threads, const OracleTable* oracle) {
  config.validate();
  OracleTable local;
  if (oracle == nullptr) {
    local = build_oracle_table(config, threads);
    oracle = &local;
  }
  std::vector<std::vector<ReplicationRecord>> reps(config.replications);
  numeric::parallel_for(config.replications, threads,
                        [&](std::size_t r) { reps[r] = run_replication_grid(config, r, *oracle); });
  auto result = aggregate(config, reps, *oracle);
  if (result.failed_replications == result.replications &&
      std::all_of(result.rows.begin(), result.rows.end(), [](const SimRow& r) { return r.used == 0; }))
    throw DataError("run_study: all replications failed");
  return result;
}

namespace {

std::string fixed1(double v) {
  if (!std::isfinite(v)) return "";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                       std::chars_format::fixed, 1);
  std::string s(buf.data(), ptr);
  return s == "-0.0" ? "0.0" : s;
}

std::string full(double v) { return std::isfinite(v) ? format_double(v) : ""; }

}  // namespace

void write_result_csv(std::ostream& out, const SimConfig& config, const SimResult& result) {
  out << "n,nu,a,b,p,p_percent,bias,rmse,rmse_ml,rmse_np,length,coverage,used,failed,ml_used,"
         "gamma_out_of_range,theta_p_true,bias_1dp,rmse_1dp,rmse_ml_1dp,rmse_np_1dp,length_1dp,"
         "coverage_1dp\n";
  for (const auto& row : result.rows) {
    out << config.n << ',' << format_double(config.nu) << ',' << format_double(config.burr.a) << ','
        << format_double(config.burr.b) << ',' << format_double(row.p) << ','
        << format_double(100.0 * row.p) << ',' << full(row.bias) << ',' << full(row.rmse) << ','
        << full(row.rmse_ml) << ',' << full(row.rmse_np) << ',' << full(row.mean_length) << ','
        << full(row.coverage) << ',' << row.used << ',' << row.failed << ',' << row.ml_used << ','
        << row.gamma_out_of_range << ',' << full(row.theta_p_true) << ',' << fixed1(row.bias) << ','
        << fixed1(row.rmse) << ',' << fixed1(row.rmse_ml) << ',' << fixed1(row.rmse_np) << ','
        << fixed1(row.mean_length) << ',' << fixed1(row.coverage) << '\n';
  }
}

}  // namespace tailmes::sim
