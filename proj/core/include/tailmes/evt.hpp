#pragma once

// Extreme-value estimators for the marginal expected shortfall of
// standardized residuals, and assembly of the volatility-scaled forecast
// with its asymptotic confidence interval.

#include <cstddef>
#include <span>

namespace tailmes::evt {

// floor(0.1 * log(n)^4); DomainError for n < 8.
std::size_t k_rule(std::size_t n);

struct TailConfig {
  std::size_t k = 0;   // exceedances for the within-sample MES
  std::size_t k1 = 0;  // order statistics for the Hill estimator
  double p = 0.0;      // target risk level
  std::size_t n = 0;   // effective (post-clipping) sample size

  // k = k1 = k_rule(n).
  static TailConfig from_rule(std::size_t n, double p);

  // d_n = k / (n p).
  double extrapolation_depth() const noexcept;
  // Throws DomainError unless 1 <= k, k1 < n, 0 < p < 1 and d_n >= 1.
  void validate() const;
};

// j-th largest value (1-based) of a private copy of `values`.
double upper_order_statistic(std::span<const double> values, std::size_t j);

// (1/k1) sum_{t<=k1} log(v_(t) / v_(k1+1)) over descending order statistics.
double hill(std::span<const double> values, std::size_t k1);

// (1/k) sum_t max(y_t, 0) 1{x_t > x_(k+1)}.
double mes_within(std::span<const double> res_x, std::span<const double> res_y, std::size_t k);

// d_n^gamma * theta_within. DomainError when d_n < 1.
double mes_extrapolate(double theta_within, double gamma_hat, const TailConfig& config);

// (1/(np)) sum_t y_t 1{x_t > x_(floor(np)+1)}, raw y (no positive part).
// With floor(np) = 0 the threshold is the sample maximum and the sum is empty.
double mes_np(std::span<const double> res_x, std::span<const double> res_y, double p);

struct MesForecast {
  double theta_hat_np_level = 0.0;  // sigma_forecast * theta_hat_p
  double theta_hat_p = 0.0;
  double theta_within = 0.0;
  double gamma_hat = 0.0;
  double sigma_forecast = 0.0;
  TailConfig config;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double ci_level = 0.0;  // 1 - iota
  bool degenerate = false;        // theta_hat_p == 0, interval [0, 0]
  bool gamma_in_range = true;     // gamma_hat in (0, 1/2)

  double interval_length() const noexcept { return ci_upper - ci_lower; }
};

// exp(Phi^{-1}(1 - iota/2) * gamma * log(d_n) / sqrt(k1)).
double interval_factor(double gamma_hat, const TailConfig& config, double iota);

MesForecast assemble_forecast(double sigma_forecast, double theta_hat_p, double gamma_hat,
                              const TailConfig& config, double iota);

// Full residual pipeline: Hill on res_y, within-sample MES, extrapolation
// and interval.
MesForecast forecast_mes(std::span<const double> res_x, std::span<const double> res_y,
                         double sigma_forecast, const TailConfig& config, double iota);

}  // namespace tailmes::evt
