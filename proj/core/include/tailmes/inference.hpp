#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Core>

namespace tailmes::inference {

// (D-1) x D contrast [I_{D-1} | 0] - (1/D) * ones.
Eigen::MatrixXd contrast_matrix(std::size_t dim);

// Upper tail of chi^2_dof.
double chi2_survival(double x, double dof);

struct WaldResult {
  std::optional<double> statistic;
  std::size_t dof = 0;
  std::optional<double> p_value;
  bool contrast_ok = false;  // T Sigma T' admitted a Cholesky factorization
};

// Wald statistic scale * (Tv)' (T Sigma T')^{-1} (Tv) against chi^2_{D-1} for
// H0: all entries of v equal. A non positive definite T Sigma T' is reported
// through contrast_ok = false rather than thrown.
WaldResult wald_test(std::span<const double> log_weighted_forecasts, const Eigen::MatrixXd& sigma,
                     double scale);

// Scale for log MES forecasts that share k = k_d: sqrt(k)/log(d_n) is the
// normalization under which the forecast errors have covariance sigma_hat.
double forecast_wald_scale(std::size_t k, double extrapolation_depth);

struct StructuralMes {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t exceedances = 0;
};

// Monte Carlo E[(S e)_2 | (S e)_1 > VaR_p((S e)_1)] for a 2x2 loading matrix S
// and independent standardized Student-t(marginal_dof) coordinates of e. The
// VaR is the empirical (1-p)-quantile of the same sample.
StructuralMes structural_mes(const Eigen::Matrix2d& loading, double marginal_dof, double p,
                             std::size_t mc_draws, std::uint64_t rng_seed);

}  // namespace tailmes::inference
