#pragma once

// Distributions for the simulation design: symmetrized standardized Burr
// marginals glued together by a Student-t copula.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "tailmes/rng.hpp"

namespace tailmes::dist {

// Burr(a, b) with d.f. F(x) = 1 - (1 + x^b)^(-a), x > 0.
struct BurrParams {
  double a = 0.25;
  double b = 20.0;

  // Throws DomainError unless a > 0, b > 0 and a*b > 2 (finite variance).
  void validate() const;
  // Extreme value index 1/(ab).
  double tail_index() const noexcept { return 1.0 / (a * b); }
};

double burr_cdf(double x, const BurrParams& params);
double burr_pdf(double x, const BurrParams& params);
double burr_quantile(double u, const BurrParams& params);
// x with 1 - F(x) = tail; accurate for tail close to 0.
double burr_tail_quantile(double tail, const BurrParams& params);
// E[B^r] = a * Beta(a - r/b, 1 + r/b); DomainError unless r < ab.
double burr_moment(double r, const BurrParams& params);

// eps = R * B / sqrt(E[B^2]) with R a Rademacher sign independent of B.
class SymmetricBurr {
 public:
  explicit SymmetricBurr(const BurrParams& params);

  const BurrParams& params() const noexcept { return params_; }
  // sqrt(E[B^2]).
  double scale() const noexcept { return scale_; }

  // Value whose upper tail probability P(eps > x) equals `tail`, tail in (0, 1/2].
  double upper_quantile(double tail) const;
  // Maps a uniform u to eps: u < 1/2 gives -|.| from burr_quantile(1 - 2u),
  // u >= 1/2 gives +|.| from burr_quantile(2u - 1).
  double from_uniform(double u) const;
  // Same map for a uniform given through a t_nu score, u = F_nu(t). Uses the
  // survivor function directly so extreme scores keep full precision.
  double from_t_score(double t, double nu) const;

  double cdf(double x) const;
  double survival(double x) const;
  double log_pdf(double x) const;

 private:
  BurrParams params_;
  double scale_;
};

// Student-t helpers (non-promoting Boost policy).
double t_cdf(double t, double nu);
double t_survival(double t, double nu);
double t_quantile(double u, double nu);
// t with P(T > t) = tail.
double t_upper_quantile(double tail, double nu);
double t_log_pdf(double t, double nu);
double t_pdf(double t, double nu);
double normal_quantile(double u);
double normal_cdf(double x);

struct TCopulaParams {
  double nu = 3.0;
  Eigen::MatrixXd corr;

  // Throws DomainError unless nu > 0 and corr is a symmetric PD correlation matrix.
  void validate() const;
  std::size_t dim() const noexcept { return static_cast<std::size_t>(corr.rows()); }
};

// Bivariate convenience: 2x2 correlation matrix with off-diagonal rho.
TCopulaParams bivariate_copula(double nu, double rho);
// Exchangeable D-dimensional correlation.
TCopulaParams equicorrelated_copula(double nu, double rho, std::size_t dim);

struct InnovationSpec {
  std::vector<BurrParams> marginals;
  TCopulaParams copula;

  void validate() const;
  std::size_t dim() const noexcept { return marginals.size(); }
};

// Draws `count` multivariate-t_nu rows (Gaussian over sqrt(chi2/nu), Cholesky
// of the correlation). Returned as t scores: apply t_cdf for copula uniforms.
Eigen::MatrixXd sample_t_scores(const TCopulaParams& copula, std::size_t count, Rng& rng);

// count x dim matrix of i.i.d. innovation rows. Deterministic given the seed.
Eigen::MatrixXd sample_innovations(const InnovationSpec& spec, std::size_t count,
                                   std::uint64_t rng_seed);
Eigen::MatrixXd sample_innovations(const InnovationSpec& spec, std::size_t count, Rng& rng);

// Upper tail copula of the bivariate t copula,
// R(x,y) = x Fbar_{nu+1}(((x/y)^{1/nu} - rho) sqrt(nu+1)/sqrt(1-rho^2)) + (x <-> y).
double tail_copula_R(double x, double y, double nu, double rho);

// v-quantile of C(. | U_X = u) for the bivariate t copula.
double tcopula_conditional_quantile(double u, double v, double nu, double rho);
// C(w | U_X = u).
double tcopula_conditional_cdf(double w, double u, double nu, double rho);

}  // namespace tailmes::dist
