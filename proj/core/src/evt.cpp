#include "tailmes/evt.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tailmes/distributions.hpp"
#include "tailmes/error.hpp"

namespace tailmes::evt {

std::size_t k_rule(std::size_t n) {
  if (n < 8) throw DomainError("k_rule: need n >= 8, got " + std::to_string(n));
  const double l = std::log(static_cast<double>(n));
  return static_cast<std::size_t>(std::floor(0.1 * l * l * l * l));
}

TailConfig TailConfig::from_rule(std::size_t n, double p) {
  const std::size_t k = k_rule(n);
  return TailConfig{k, k, p, n};
}

double TailConfig::extrapolation_depth() const noexcept {
  return static_cast<double>(k) / (static_cast<double>(n) * p);
}

void TailConfig::validate() const {
  if (k < 1 || k >= n) throw DomainError("tail config: need 1 <= k < n");
  if (k1 < 1 || k1 >= n) throw DomainError("tail config: need 1 <= k1 < n");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("tail config: need 0 < p < 1");
  if (!(extrapolation_depth() >= 1.0))
    throw DomainError("tail config: d_n = k/(np) = " + std::to_string(extrapolation_depth()) +
                      " < 1; p too large for k = " + std::to_string(k));
}

double upper_order_statistic(std::span<const double> values, std::size_t j) {
  if (j < 1 || j > values.size()) throw DomainError("upper_order_statistic: rank out of range");
  std::vector<double> copy(values.begin(), values.end());
  auto nth = copy.begin() + static_cast<std::ptrdiff_t>(j - 1);
  std::nth_element(copy.begin(), nth, copy.end(), std::greater<>());
  return *nth;
}

double hill(std::span<const double> values, std::size_t k1) {
  if (k1 < 1 || k1 + 1 > values.size()) throw DomainError("hill: need 1 <= k1 and k1 + 1 <= length");
  std::vector<double> copy(values.begin(), values.end());
  const auto threshold_it = copy.begin() + static_cast<std::ptrdiff_t>(k1);
  std::nth_element(copy.begin(), threshold_it, copy.end(), std::greater<>());
  const double threshold = *threshold_it;
  if (!(threshold > 0.0))
    throw DomainError("hill: the (k1+1)-th largest value is not positive; k1 too large");
  // The k1 values before the threshold are the top k1 order statistics.
  std::sort(copy.begin(), threshold_it, std::greater<>());
  double sum = 0.0;
  for (auto it = copy.begin(); it != threshold_it; ++it) sum += std::log(*it / threshold);
  return sum / static_cast<double>(k1);
}

namespace {

void require_aligned(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw DataError(std::string(what) + ": series lengths differ");
}

}  // namespace

double mes_within(std::span<const double> res_x, std::span<const double> res_y, std::size_t k) {
  require_aligned(res_x, res_y, "mes_within");
  if (k < 1 || k + 1 > res_x.size()) throw DomainError("mes_within: need 1 <= k and k + 1 <= length");
  const double threshold = upper_order_statistic(res_x, k + 1);
  double sum = 0.0;
  for (std::size_t t = 0; t < res_x.size(); ++t)
    if (res_x[t] > threshold) sum += std::max(res_y[t], 0.0);
  return sum / static_cast<double>(k);
}

double mes_extrapolate(double theta_within, double gamma_hat, const TailConfig& config) {
  config.validate();
  return std::pow(config.extrapolation_depth(), gamma_hat) * theta_within;
}

double mes_np(std::span<const double> res_x, std::span<const double> res_y, double p) {
  require_aligned(res_x, res_y, "mes_np");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("mes_np: need 0 < p < 1");
  const double np = static_cast<double>(res_x.size()) * p;
  const auto m = static_cast<std::size_t>(std::floor(np));
  if (m + 1 > res_x.size()) throw DomainError("mes_np: floor(np) + 1 exceeds the sample size");
  const double threshold = upper_order_statistic(res_x, m + 1);
  double sum = 0.0;
  for (std::size_t t = 0; t < res_x.size(); ++t)
    if (res_x[t] > threshold) sum += res_y[t];
  return sum / np;
}

double interval_factor(double gamma_hat, const TailConfig& config, double iota) {
  if (!(iota > 0.0 && iota < 1.0)) throw DomainError("interval: need 0 < iota < 1");
  const double z = dist::normal_quantile(1.0 - iota / 2.0);
  return std::exp(z * gamma_hat * std::log(config.extrapolation_depth()) /
                  std::sqrt(static_cast<double>(config.k1)));
}

MesForecast assemble_forecast(double sigma_forecast, double theta_hat_p, double gamma_hat,
                              const TailConfig& config, double iota) {
  config.validate();
  if (!(sigma_forecast > 0.0)) throw DomainError("assemble_forecast: volatility forecast must be positive");
  if (!(theta_hat_p >= 0.0)) throw DomainError("assemble_forecast: theta_hat_p must be nonnegative");

  MesForecast f;
  f.theta_hat_p = theta_hat_p;
  f.gamma_hat = gamma_hat;
  f.sigma_forecast = sigma_forecast;
  f.config = config;
  f.ci_level = 1.0 - iota;
  f.theta_hat_np_level = sigma_forecast * theta_hat_p;
  f.gamma_in_range = gamma_hat > 0.0 && gamma_hat < 0.5;

  const double factor = interval_factor(gamma_hat, config, iota);
  if (theta_hat_p == 0.0) {
    f.degenerate = true;
    f.ci_lower = f.ci_upper = 0.0;
    return f;
  }
  const double lo = f.theta_hat_np_level / factor;
  const double hi = f.theta_hat_np_level * factor;
  f.ci_lower = std::min(lo, hi);
  f.ci_upper = std::max(lo, hi);
  return f;
}

MesForecast forecast_mes(std::span<const double> res_x, std::span<const double> res_y,
                         double sigma_forecast, const TailConfig& config, double iota) {
  config.validate();
  const double gamma = hill(res_y, config.k1);
  const double within = mes_within(res_x, res_y, config.k);
  const double theta_p = mes_extrapolate(within, gamma, config);
  MesForecast f = assemble_forecast(sigma_forecast, theta_p, gamma, config, iota);
  f.theta_within = within;
  return f;
}

}  // namespace tailmes::evt
