#pragma once

// Empirical tail-copula evaluations between component residual series and
// the estimated covariance of the joint limit of the log MES forecasts.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace tailmes::tail {

struct RPair {
  double own = 0.0;      // R_ij(q_i, q_j): i above its (k_i+1)-th, j above its (k_j+1)-th
  double swapped = 0.0;  // R_ij(q_j, q_i): i above its (k_j+1)-th, j above its (k_i+1)-th
};

RPair r_hat_pair(std::span<const double> res_i, std::span<const double> res_j, std::size_t k,
                 std::size_t k_i, std::size_t k_j);

struct TailCovariance {
  Eigen::MatrixXd sigma;      // D x D
  std::vector<double> gammas;
  std::vector<std::size_t> ks;
  std::size_t k = 0;
  Eigen::MatrixXd r_own;      // R_ij(q_i, q_j), diagonal k_d / k
  Eigen::MatrixXd r_swapped;  // R_ij(q_j, q_i), diagonal k_d / k
};

// sigma_ij = k gamma_i gamma_j / sqrt(k_i k_j) * (R_ij(q_i,q_j) + R_ij(q_j,q_i)) / 2,
// with the diagonal set to gamma_d^2. Only the strict upper triangle of the R
// matrices is read; it is mirrored.
TailCovariance sigma_hat(std::span<const double> gammas, std::span<const std::size_t> ks,
                         std::size_t k, const Eigen::MatrixXd& r_own,
                         const Eigen::MatrixXd& r_swapped);

// Computes all pairs i < j from the columns of `residuals` and assembles sigma_hat.
TailCovariance estimate_tail_covariance(const Eigen::MatrixXd& residuals,
                                        std::span<const double> gammas,
                                        std::span<const std::size_t> ks, std::size_t k);

}  // namespace tailmes::tail
