#pragma once

// Diagonal CCC-GARCH(1,1): simulation, Gaussian quasi-maximum-likelihood
// fitting per margin, volatility filtering and residual extraction.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tailmes::garch {

// sigma_t^2 = omega + alpha * y_{t-1}^2 + beta * sigma_{t-1}^2
struct GarchParams {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  double persistence() const noexcept { return alpha + beta; }
  // omega / (1 - alpha - beta); infinite when alpha + beta >= 1.
  double unconditional_variance() const noexcept;
};

// Upper bound imposed on alpha + beta while fitting.
inline constexpr double kPersistenceCap = 1.0 - 1e-6;

struct GarchFit {
  GarchParams params;
  std::vector<double> variance_path;  // fitted sigma_t^2, aligned with the input
  double variance_forecast = 0.0;     // omega + alpha y_n^2 + beta sigma_n^2
  double loglik = 0.0;
  bool converged = false;
  bool on_persistence_cap = false;
  std::size_t iterations = 0;

  double vol_forecast() const;
  double volatility(std::size_t t) const;
};

struct SimulatedPath {
  Eigen::MatrixXd losses;     // T x D
  Eigen::MatrixXd variances;  // T x D, true sigma_t^2
  Eigen::VectorXd next_variance;  // sigma_{T}^2 for the step after the last row
};

// Row 0 uses sigma0 directly (y_0 = sigma0 * eps_0); later rows follow the
// GARCH recursion. One parameter set per column of `innovations`.
SimulatedPath simulate_ccc(std::span<const GarchParams> params_per_margin,
                           const Eigen::MatrixXd& innovations, std::span<const double> sigma0);

// Initial variance used by the fitting recursion: the sample variance.
double initial_variance(std::span<const double> series);

// Variance path under `params` started at initial_variance(series).
std::vector<double> filter_variance(std::span<const double> series, const GarchParams& params);

// -1/2 sum_t (log sigma_t^2 + y_t^2 / sigma_t^2).
double quasi_loglik(std::span<const double> series, const GarchParams& params);

struct QmleOptions {
  std::size_t max_simplex_evaluations = 3000;
  std::size_t max_refinement_steps = 60;
};

// Maximizes the Gaussian quasi-likelihood over
// {omega > 0, alpha >= 0, beta >= 0, alpha + beta <= kPersistenceCap}.
// Nelder-Mead on (log omega, alpha, beta), then projected Newton refinement
// using the analytic gradient. Requires at least 50 finite, nonconstant values.
GarchFit qmle_fit(std::span<const double> series, const QmleOptions& options = {});

struct ResidualPanel {
  Eigen::MatrixXd residuals;  // (T - clipped) x D
  std::size_t clipped = 0;
  std::vector<std::string> margin_ids;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(residuals.rows()); }
  std::size_t margins() const noexcept { return static_cast<std::size_t>(residuals.cols()); }
  std::span<const double> column(std::size_t j) const {
    return {residuals.col(static_cast<Eigen::Index>(j)).data(), rows()};
  }
};

// eps_t = y_t / sigma_t per margin with the first ell_n rows dropped.
ResidualPanel filter_and_residualize(const Eigen::MatrixXd& losses, std::span<const GarchFit> fits,
                                     std::size_t ell_n,
                                     std::vector<std::string> margin_ids = {});

}  // namespace tailmes::garch
