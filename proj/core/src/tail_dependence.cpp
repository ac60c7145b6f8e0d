#include "tailmes/tail_dependence.hpp"

#include <cmath>

#include "tailmes/error.hpp"
#include "tailmes/evt.hpp"

namespace tailmes::tail {

RPair r_hat_pair(std::span<const double> res_i, std::span<const double> res_j, std::size_t k,
                 std::size_t k_i, std::size_t k_j) {
  if (res_i.size() != res_j.size()) throw DataError("r_hat_pair: series lengths differ");
  if (k < 1) throw DomainError("r_hat_pair: need k >= 1");
  if (k_i + 1 > res_i.size() || k_j + 1 > res_j.size())
    throw DomainError("r_hat_pair: k_i + 1 and k_j + 1 must not exceed the length");

  const double i_at_ki = evt::upper_order_statistic(res_i, k_i + 1);
  const double j_at_kj = evt::upper_order_statistic(res_j, k_j + 1);
  const double i_at_kj = k_i == k_j ? i_at_ki : evt::upper_order_statistic(res_i, k_j + 1);
  const double j_at_ki = k_i == k_j ? j_at_kj : evt::upper_order_statistic(res_j, k_i + 1);

  std::size_t own = 0, swapped = 0;
  for (std::size_t t = 0; t < res_i.size(); ++t) {
    if (res_i[t] > i_at_ki && res_j[t] > j_at_kj) ++own;
    if (res_i[t] > i_at_kj && res_j[t] > j_at_ki) ++swapped;
  }
  const double kd = static_cast<double>(k);
  return {static_cast<double>(own) / kd, static_cast<double>(swapped) / kd};
}

TailCovariance sigma_hat(std::span<const double> gammas, std::span<const std::size_t> ks,
                         std::size_t k, const Eigen::MatrixXd& r_own,
                         const Eigen::MatrixXd& r_swapped) {
  const auto dim = static_cast<Eigen::Index>(gammas.size());
  if (ks.size() != gammas.size() || r_own.rows() != dim || r_own.cols() != dim ||
      r_swapped.rows() != dim || r_swapped.cols() != dim)
    throw DataError("sigma_hat: inconsistent dimensions");
  if (k < 1) throw DomainError("sigma_hat: need k >= 1");
  for (auto kd : ks)
    if (kd < 1) throw DomainError("sigma_hat: need k_d >= 1");

  TailCovariance out;
  out.gammas.assign(gammas.begin(), gammas.end());
  out.ks.assign(ks.begin(), ks.end());
  out.k = k;
  out.sigma.resize(dim, dim);
  out.r_own = r_own;
  out.r_swapped = r_swapped;
  const double kk = static_cast<double>(k);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    out.sigma(i, i) = gammas[ui] * gammas[ui];
    out.r_own(i, i) = out.r_swapped(i, i) = static_cast<double>(ks[ui]) / kk;
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const double scale = kk * gammas[ui] * gammas[uj] /
                           std::sqrt(static_cast<double>(ks[ui]) * static_cast<double>(ks[uj]));
      const double value = scale * 0.5 * (r_own(i, j) + r_swapped(i, j));
      out.sigma(i, j) = out.sigma(j, i) = value;
      out.r_own(j, i) = r_own(i, j);
      out.r_swapped(j, i) = r_swapped(i, j);
    }
  }
  return out;
}

TailCovariance estimate_tail_covariance(const Eigen::MatrixXd& residuals,
                                        std::span<const double> gammas,
                                        std::span<const std::size_t> ks, std::size_t k) {
  const Eigen::Index dim = residuals.cols();
  if (static_cast<std::size_t>(dim) != gammas.size() || ks.size() != gammas.size())
    throw DataError("estimate_tail_covariance: inconsistent dimensions");
  const auto rows = static_cast<std::size_t>(residuals.rows());
  Eigen::MatrixXd own = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd swapped = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      const auto pair = r_hat_pair({residuals.col(i).data(), rows}, {residuals.col(j).data(), rows},
                                   k, ks[static_cast<std::size_t>(i)], ks[static_cast<std::size_t>(j)]);
      own(i, j) = pair.own;
      swapped(i, j) = pair.swapped;
    }
  }
  return sigma_hat(gammas, ks, k, own, swapped);
}

}  // namespace tailmes::tail
