#include "tailmes/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/gamma.hpp>

#include "tailmes/error.hpp"
#include "tailmes/evt.hpp"
#include "tailmes/rng.hpp"

namespace tailmes::inference {

Eigen::MatrixXd contrast_matrix(std::size_t dim) {
  if (dim < 2) throw DomainError("contrast_matrix: need D >= 2");
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(d - 1, d, -1.0 / static_cast<double>(dim));
  for (Eigen::Index r = 0; r < d - 1; ++r) t(r, r) += 1.0;
  return t;
}

double chi2_survival(double x, double dof) {
  if (!(dof > 0.0)) throw DomainError("chi2_survival: need dof > 0");
  if (std::isnan(x)) throw DomainError("chi2_survival: NaN argument");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

WaldResult wald_test(std::span<const double> log_weighted_forecasts, const Eigen::MatrixXd& sigma,
                     double scale) {
  const std::size_t dim = log_weighted_forecasts.size();
  if (dim < 2) throw DomainError("wald_test: need at least two series");
  if (sigma.rows() != static_cast<Eigen::Index>(dim) || sigma.cols() != sigma.rows())
    throw DataError("wald_test: covariance dimension does not match the forecasts");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("wald_test: scale must be positive");
  for (double v : log_weighted_forecasts)
    if (!std::isfinite(v)) throw DataError("wald_test: non-finite log forecast");
  if (!sigma.allFinite()) throw DataError("wald_test: non-finite covariance entry");

  WaldResult out;
  out.dof = dim - 1;
  const Eigen::MatrixXd t = contrast_matrix(dim);
  const Eigen::Map<const Eigen::VectorXd> v(log_weighted_forecasts.data(),
                                            static_cast<Eigen::Index>(dim));
  const Eigen::MatrixXd m = t * sigma * t.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return out;
  out.contrast_ok = true;
  const Eigen::VectorXd z = llt.matrixL().solve(t * v);
  const double stat = scale * z.squaredNorm();
  out.statistic = stat;
  out.p_value = chi2_survival(stat, static_cast<double>(out.dof));
  return out;
}

double forecast_wald_scale(std::size_t k, double extrapolation_depth) {
  if (!(extrapolation_depth > 1.0))
    throw DomainError("forecast_wald_scale: need d_n > 1 (log d_n = 0 gives no extrapolation variance)");
  const double l = std::log(extrapolation_depth);
  return static_cast<double>(k) / (l * l);
}

StructuralMes structural_mes(const Eigen::Matrix2d& loading, double marginal_dof, double p,
                             std::size_t mc_draws, std::uint64_t rng_seed) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("structural_mes: need 0 < p < 1");
  if (mc_draws < 100000) throw DomainError("structural_mes: need at least 1e5 draws");
  if (!(marginal_dof > 2.0)) throw DomainError("structural_mes: need dof > 2 for standardization");

  Rng rng(rng_seed);
  std::student_t_distribution<double> student(marginal_dof);
  const double standardize = std::sqrt((marginal_dof - 2.0) / marginal_dof);

  std::vector<double> z1(mc_draws), z2(mc_draws);
  for (std::size_t i = 0; i < mc_draws; ++i) {
    const double e1 = student(rng) * standardize;
    const double e2 = student(rng) * standardize;
    z1[i] = loading(0, 0) * e1 + loading(0, 1) * e2;
    z2[i] = loading(1, 0) * e1 + loading(1, 1) * e2;
  }
  const auto m = static_cast<std::size_t>(std::floor(static_cast<double>(mc_draws) * p));
  if (m < 100) throw DomainError("structural_mes: fewer than 100 exceedances; increase draws or p");
  const double threshold = evt::upper_order_statistic(z1, m + 1);

  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mc_draws; ++i) {
    if (z1[i] > threshold) {
      sum += z2[i];
      sum_sq += z2[i] * z2[i];
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double var = (sum_sq - static_cast<double>(count) * mean * mean) / static_cast<double>(count - 1);
  return {mean, std::sqrt(var / static_cast<double>(count)), count};
}

}  // namespace tailmes::inference
