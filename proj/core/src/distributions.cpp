#include "tailmes/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "tailmes/error.hpp"

namespace tailmes::dist {

namespace {

using FastPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
using StudentT = boost::math::students_t_distribution<double, FastPolicy>;
using Normal = boost::math::normal_distribution<double, FastPolicy>;

void require_probability(double u, const char* what) {
  if (!(u > 0.0 && u < 1.0))
    throw DomainError(std::string(what) + ": probability must lie in (0,1), got " +
                      std::to_string(u));
}

}  // namespace

void BurrParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw DomainError("Burr parameters must be positive and finite");
  if (!(a * b > 2.0)) throw DomainError("Burr parameters need a*b > 2 for a finite variance");
}

double burr_cdf(double x, const BurrParams& params) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-params.a * std::log1p(std::pow(x, params.b)));
}

double burr_pdf(double x, const BurrParams& params) {
  if (x <= 0.0) return 0.0;
  const double xb = std::pow(x, params.b);
  return params.a * params.b * xb / x * std::exp(-(params.a + 1.0) * std::log1p(xb));
}

double burr_tail_quantile(double tail, const BurrParams& params) {
  if (!(tail > 0.0 && tail <= 1.0))
    throw DomainError("burr_tail_quantile: tail probability must lie in (0,1]");
  if (tail == 1.0) return 0.0;
  return std::pow(std::expm1(-std::log(tail) / params.a), 1.0 / params.b);
}

double burr_quantile(double u, const BurrParams& params) {
  require_probability(u, "burr_quantile");
  // (1-u)^(-1/a) - 1 = expm1(-log1p(-u)/a)
  return std::pow(std::expm1(-std::log1p(-u) / params.a), 1.0 / params.b);
}

double burr_moment(double r, const BurrParams& params) {
  params.validate();
  if (!(r > 0.0)) throw DomainError("burr_moment: order must be positive");
  if (!(r < params.a * params.b))
    throw DomainError("burr_moment: moment of order " + std::to_string(r) +
                      " is infinite (needs r < a*b)");
  const double x = params.a - r / params.b;
  const double y = 1.0 + r / params.b;
  // a * Gamma(x) Gamma(y) / Gamma(x + y), with x + y = a + 1.
  return params.a * std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(params.a + 1.0));
}

SymmetricBurr::SymmetricBurr(const BurrParams& params)
    : params_(params), scale_((params.validate(), std::sqrt(burr_moment(2.0, params)))) {}

double SymmetricBurr::upper_quantile(double tail) const {
  if (!(tail > 0.0 && tail <= 0.5))
    throw DomainError("SymmetricBurr::upper_quantile: tail must lie in (0, 1/2]");
  return burr_tail_quantile(2.0 * tail, params_) / scale_;
}

double SymmetricBurr::from_uniform(double u) const {
  require_probability(u, "SymmetricBurr::from_uniform");
  if (u >= 0.5) return burr_tail_quantile(2.0 * (1.0 - u), params_) / scale_;
  return -burr_tail_quantile(2.0 * u, params_) / scale_;
}

double SymmetricBurr::from_t_score(double t, double nu) const {
  const double tail = 2.0 * t_survival(std::abs(t), nu);
  if (!(tail > 0.0)) return std::copysign(std::numeric_limits<double>::infinity(), t);
  const double magnitude = burr_tail_quantile(std::min(tail, 1.0), params_) / scale_;
  return t >= 0.0 ? magnitude : -magnitude;
}

double SymmetricBurr::survival(double x) const {
  const double tail_b = 1.0 - burr_cdf(scale_ * std::abs(x), params_);
  return x >= 0.0 ? 0.5 * tail_b : 1.0 - 0.5 * tail_b;
}

double SymmetricBurr::cdf(double x) const {
  const double tail_b = std::exp(-params_.a * std::log1p(std::pow(scale_ * std::abs(x), params_.b)));
  return x >= 0.0 ? 1.0 - 0.5 * tail_b : 0.5 * tail_b;
}

double SymmetricBurr::log_pdf(double x) const {
  const double y = scale_ * std::abs(x);
  if (y == 0.0) return params_.b > 1.0 ? -std::numeric_limits<double>::infinity()
                                       : std::numeric_limits<double>::infinity();
  const double log_y = std::log(y);
  return std::log(0.5 * scale_ * params_.a * params_.b) + (params_.b - 1.0) * log_y -
         (params_.a + 1.0) * std::log1p(std::exp(params_.b * log_y));
}

double t_cdf(double t, double nu) { return boost::math::cdf(StudentT(nu), t); }

double t_survival(double t, double nu) {
  return boost::math::cdf(boost::math::complement(StudentT(nu), t));
}

double t_quantile(double u, double nu) {
  require_probability(u, "t_quantile");
  return boost::math::quantile(StudentT(nu), u);
}

double t_upper_quantile(double tail, double nu) {
  require_probability(tail, "t_upper_quantile");
  return boost::math::quantile(boost::math::complement(StudentT(nu), tail));
}

double t_log_pdf(double t, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(t * t / nu);
}

double t_pdf(double t, double nu) { return std::exp(t_log_pdf(t, nu)); }

double normal_quantile(double u) {
  require_probability(u, "normal_quantile");
  return boost::math::quantile(Normal(), u);
}

double normal_cdf(double x) { return boost::math::cdf(Normal(), x); }

void TCopulaParams::validate() const {
  if (!(nu > 0.0)) throw DomainError("t copula: degrees of freedom must be positive");
  if (corr.rows() == 0 || corr.rows() != corr.cols())
    throw DomainError("t copula: correlation matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    if (std::abs(corr(i, i) - 1.0) > 1e-12)
      throw DomainError("t copula: correlation matrix needs a unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(corr(i, j) - corr(j, i)) > 1e-12)
        throw DomainError("t copula: correlation matrix must be symmetric");
      if (std::abs(corr(i, j)) > 1.0)
        throw DomainError("t copula: correlation entries must lie in [-1, 1]");
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success)
    throw DomainError("t copula: correlation matrix is not positive definite");
}

TCopulaParams bivariate_copula(double nu, double rho) {
  TCopulaParams c;
  c.nu = nu;
  c.corr = Eigen::MatrixXd::Identity(2, 2);
  c.corr(0, 1) = c.corr(1, 0) = rho;
  return c;
}

TCopulaParams equicorrelated_copula(double nu, double rho, std::size_t dim) {
  TCopulaParams c;
  c.nu = nu;
  const auto d = static_cast<Eigen::Index>(dim);
  c.corr = Eigen::MatrixXd::Constant(d, d, rho);
  c.corr.diagonal().setOnes();
  return c;
}

void InnovationSpec::validate() const {
  if (marginals.empty()) throw DomainError("innovation spec needs at least one margin");
  copula.validate();
  if (copula.dim() != marginals.size())
    throw DomainError("innovation spec: copula dimension differs from the number of margins");
  for (const auto& m : marginals) m.validate();
}

Eigen::MatrixXd sample_t_scores(const TCopulaParams& copula, std::size_t count, Rng& rng) {
  copula.validate();
  const Eigen::Index dim = copula.corr.rows();
  const Eigen::MatrixXd lower = Eigen::LLT<Eigen::MatrixXd>(copula.corr).matrixL();
  std::normal_distribution<double> gauss;
  std::chi_squared_distribution<double> chi2(copula.nu);

  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), dim);
  Eigen::VectorXd g(dim);
  for (Eigen::Index row = 0; row < out.rows(); ++row) {
    for (Eigen::Index j = 0; j < dim; ++j) g(j) = gauss(rng);
    const double mix = std::sqrt(chi2(rng) / copula.nu);
    out.row(row) = (lower * g).transpose() / mix;
  }
  return out;
}

Eigen::MatrixXd sample_innovations(const InnovationSpec& spec, std::size_t count, Rng& rng) {
  if (count < 1) throw DomainError("sample_innovations: count must be at least 1");
  spec.validate();
  Eigen::MatrixXd scores = sample_t_scores(spec.copula, count, rng);
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    const SymmetricBurr margin(spec.marginals[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < scores.rows(); ++i)
      scores(i, j) = margin.from_t_score(scores(i, j), spec.copula.nu);
  }
  return scores;
}

Eigen::MatrixXd sample_innovations(const InnovationSpec& spec, std::size_t count,
                                   std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return sample_innovations(spec, count, rng);
}

double tail_copula_R(double x, double y, double nu, double rho) {
  if (!(x >= 0.0) || !(y >= 0.0)) throw DomainError("tail_copula_R: arguments must be nonnegative");
  if (std::isinf(x) && std::isinf(y)) throw DomainError("tail_copula_R: both arguments infinite");
  if (!(nu > 0.0) || !(rho > -1.0 && rho < 1.0))
    throw DomainError("tail_copula_R: need nu > 0 and rho in (-1,1)");
  if (x == 0.0 || y == 0.0) return 0.0;
  const double c = std::sqrt(nu + 1.0) / std::sqrt(1.0 - rho * rho);
  const double nu1 = nu + 1.0;
  if (std::isinf(y)) return x * t_survival(-rho * c, nu1);
  if (std::isinf(x)) return y * t_survival(-rho * c, nu1);
  const double r = std::pow(x / y, 1.0 / nu);
  return x * t_survival((r - rho) * c, nu1) + y * t_survival((1.0 / r - rho) * c, nu1);
}

namespace {

struct ConditionalLaw {
  double location;
  double scale;
};

ConditionalLaw conditional_law(double u, double nu, double rho) {
  const double tx = t_quantile(u, nu);
  return {rho * tx, std::sqrt((nu + tx * tx) * (1.0 - rho * rho) / (nu + 1.0))};
}

}  // namespace

double tcopula_conditional_quantile(double u, double v, double nu, double rho) {
  require_probability(u, "tcopula_conditional_quantile (u)");
  require_probability(v, "tcopula_conditional_quantile (v)");
  const auto law = conditional_law(u, nu, rho);
  return t_cdf(law.location + law.scale * t_quantile(v, nu + 1.0), nu);
}

double tcopula_conditional_cdf(double w, double u, double nu, double rho) {
  require_probability(u, "tcopula_conditional_cdf (u)");
  if (w <= 0.0) return 0.0;
  if (w >= 1.0) return 1.0;
  const auto law = conditional_law(u, nu, rho);
  return t_cdf((t_quantile(w, nu) - law.location) / law.scale, nu + 1.0);
}

}  // namespace tailmes::dist
