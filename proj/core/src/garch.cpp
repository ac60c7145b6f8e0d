#include "tailmes/garch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "tailmes/error.hpp"
#include "tailmes/numeric.hpp"

namespace tailmes::garch {

double GarchParams::unconditional_variance() const noexcept {
  const double s = persistence();
  return s < 1.0 ? omega / (1.0 - s) : std::numeric_limits<double>::infinity();
}

double GarchFit::vol_forecast() const { return std::sqrt(variance_forecast); }

double GarchFit::volatility(std::size_t t) const { return std::sqrt(variance_path.at(t)); }

SimulatedPath simulate_ccc(std::span<const GarchParams> params_per_margin,
                           const Eigen::MatrixXd& innovations, std::span<const double> sigma0) {
  const auto dim = static_cast<std::size_t>(innovations.cols());
  if (params_per_margin.size() != dim || sigma0.size() != dim)
    throw DataError("simulate_ccc: need one parameter set and one sigma0 per margin");
  if (!innovations.allFinite()) throw DataError("simulate_ccc: innovations must be finite");
  for (double s : sigma0)
    if (!(s > 0.0)) throw DomainError("simulate_ccc: sigma0 must be positive");

  const Eigen::Index rows = innovations.rows();
  SimulatedPath path;
  path.losses.resize(rows, innovations.cols());
  path.variances.resize(rows, innovations.cols());
  path.next_variance.resize(innovations.cols());

  for (Eigen::Index j = 0; j < innovations.cols(); ++j) {
    const auto& prm = params_per_margin[static_cast<std::size_t>(j)];
    double h = sigma0[static_cast<std::size_t>(j)] * sigma0[static_cast<std::size_t>(j)];
    for (Eigen::Index t = 0; t < rows; ++t) {
      if (t > 0) {
        const double y_prev = path.losses(t - 1, j);
        h = prm.omega + prm.alpha * y_prev * y_prev + prm.beta * h;
      }
      path.variances(t, j) = h;
      path.losses(t, j) = std::sqrt(h) * innovations(t, j);
    }
    const double y_last = rows > 0 ? path.losses(rows - 1, j) : 0.0;
    path.next_variance(j) = prm.omega + prm.alpha * y_last * y_last + prm.beta * h;
  }
  return path;
}

double initial_variance(std::span<const double> series) {
  const double n = static_cast<double>(series.size());
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double ss = 0.0;
  for (double y : series) ss += (y - mean) * (y - mean);
  return ss / (n - 1.0);
}

std::vector<double> filter_variance(std::span<const double> series, const GarchParams& params) {
  std::vector<double> h(series.size());
  if (series.empty()) return h;
  h[0] = initial_variance(series);
  for (std::size_t t = 1; t < series.size(); ++t)
    h[t] = params.omega + params.alpha * series[t - 1] * series[t - 1] + params.beta * h[t - 1];
  return h;
}

namespace {

double loglik_with_start(std::span<const double> series, const GarchParams& p, double h0) {
  double h = h0;
  double sum = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (t > 0) h = p.omega + p.alpha * series[t - 1] * series[t - 1] + p.beta * h;
    if (!(h > 0.0)) return -std::numeric_limits<double>::infinity();
    sum += std::log(h) + series[t] * series[t] / h;
  }
  return -0.5 * sum;
}

// Free coordinates: x = (log omega, alpha, beta).
using Point = std::array<double, 3>;

GarchParams to_params(const Point& x) { return {std::exp(x[0]), x[1], x[2]}; }

// Euclidean projection of (alpha, beta) onto {a >= 0, b >= 0, a + b <= cap}.
Point project(Point x) {
  x[1] = std::max(x[1], 0.0);
  x[2] = std::max(x[2], 0.0);
  const double excess = x[1] + x[2] - kPersistenceCap;
  if (excess > 0.0) {
    x[1] -= 0.5 * excess;
    x[2] -= 0.5 * excess;
    if (x[1] < 0.0) {
      x[2] = kPersistenceCap;
      x[1] = 0.0;
    } else if (x[2] < 0.0) {
      x[1] = kPersistenceCap;
      x[2] = 0.0;
    }
  }
  return x;
}

// Negative quasi-likelihood and its gradient in x.
struct Objective {
  std::span<const double> y;
  double h0;

  double value(const Point& x) const { return -loglik_with_start(y, to_params(x), h0); }

  Point gradient(const Point& x) const {
    const GarchParams p = to_params(x);
    double h = h0;
    double dw = 0.0, da = 0.0, db = 0.0;  // dh/d(omega, alpha, beta)
    double gw = 0.0, ga = 0.0, gb = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      if (t > 0) {
        const double y2 = y[t - 1] * y[t - 1];
        dw = 1.0 + p.beta * dw;
        da = y2 + p.beta * da;
        db = h + p.beta * db;
        h = p.omega + p.alpha * y2 + p.beta * h;
      }
      // d/dh of 0.5 (log h + y^2/h)
      const double c = 0.5 * (1.0 / h - y[t] * y[t] / (h * h));
      gw += c * dw;
      ga += c * da;
      gb += c * db;
    }
    return {gw * p.omega, ga, gb};
  }
};

bool at_lower(double v) { return v <= 0.0; }

// Coordinates of the gradient that can still decrease the objective inside the feasible set.
Point projected_gradient(const Point& x, const Point& g) {
  Point pg = g;
  if (at_lower(x[1]) && g[1] > 0.0) pg[1] = 0.0;
  if (at_lower(x[2]) && g[2] > 0.0) pg[2] = 0.0;
  if (x[1] + x[2] >= kPersistenceCap) {
    // Moving outward along (1,1) is blocked; drop the outward component.
    const double outward = -(g[1] + g[2]) / 2.0;
    if (outward > 0.0) {
      pg[1] += outward;
      pg[2] += outward;
    }
  }
  return pg;
}

}  // namespace

double quasi_loglik(std::span<const double> series, const GarchParams& params) {
  return loglik_with_start(series, params, initial_variance(series));
}

GarchFit qmle_fit(std::span<const double> series, const QmleOptions& options) {
  if (series.size() < 50) throw DataError("qmle_fit: need at least 50 observations");
  for (double v : series)
    if (!std::isfinite(v)) throw DataError("qmle_fit: series contains non-finite values");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) throw DataError("qmle_fit: series is constant");

  const double h0 = initial_variance(series);
  const Objective objective{series, h0};
  const double n = static_cast<double>(series.size());

  // Starting point: best of a few persistence profiles with variance targeting.
  Point start{};
  double start_value = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : std::array<std::pair<double, double>, 4>{
           {{0.05, 0.90}, {0.10, 0.80}, {0.20, 0.70}, {0.05, 0.50}}}) {
    const Point x{std::log(h0 * (1.0 - a - b)), a, b};
    const double v = objective.value(x);
    if (v < start_value) {
      start_value = v;
      start = x;
    }
  }

  auto penalized = [&](const std::vector<double>& v) {
    const Point raw{v[0], v[1], v[2]};
    const Point x = project(raw);
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) d2 += (raw[i] - x[i]) * (raw[i] - x[i]);
    return objective.value(x) + 100.0 * n * d2;
  };
  numeric::SimplexOptions simplex_options;
  simplex_options.max_evaluations = options.max_simplex_evaluations;
  simplex_options.f_tolerance = 1e-13;
  simplex_options.x_tolerance = 1e-7;
  const auto simplex = numeric::nelder_mead(
      penalized, {start[0], start[1], start[2]}, {0.4, 0.04, 0.04}, simplex_options);

  Point x = project({simplex.x[0], simplex.x[1], simplex.x[2]});
  double fx = objective.value(x);
  std::size_t iterations = simplex.evaluations;

  // Projected Newton refinement: Hessian from central differences of the
  // analytic gradient, restricted to coordinates not held at a bound.
  Point g = objective.gradient(x);
  for (std::size_t step = 0; step < options.max_refinement_steps; ++step) {
    ++iterations;
    const Point pg = projected_gradient(x, g);
    std::array<bool, 3> is_free{true, !(at_lower(x[1]) && g[1] > 0.0),
                                !(at_lower(x[2]) && g[2] > 0.0)};
    const bool on_cap = x[1] + x[2] >= kPersistenceCap;

    Eigen::Matrix3d hess;
    for (int j = 0; j < 3; ++j) {
      const double e = 1e-5 * std::max(1.0, std::abs(x[j]));
      Point xp = x, xm = x;
      xp[j] += e;
      xm[j] -= e;
      const Point gp = objective.gradient(xp), gm = objective.gradient(xm);
      for (int i = 0; i < 3; ++i) hess(i, j) = (gp[i] - gm[i]) / (2.0 * e);
    }
    hess = 0.5 * (hess + hess.transpose()).eval();

    Eigen::Vector3d direction = Eigen::Vector3d::Zero();
    Eigen::Vector3d grad(pg[0], pg[1], pg[2]);
    std::vector<int> idx;
    for (int i = 0; i < 3; ++i)
      if (is_free[static_cast<std::size_t>(i)]) idx.push_back(i);
    bool newton_ok = !on_cap && !idx.empty();
    if (newton_ok) {
      const auto m = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd hs(m, m);
      Eigen::VectorXd gs(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        gs(a) = grad(idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < m; ++b)
          hs(a, b) = hess(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(hs);
      if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd ds = -llt.solve(gs);
        for (Eigen::Index a = 0; a < m; ++a) direction(idx[static_cast<std::size_t>(a)]) = ds(a);
      } else {
        newton_ok = false;
      }
    }
    if (!newton_ok) {
      // Scaled steepest descent.
      for (int i = 0; i < 3; ++i) {
        const double curvature = std::max(std::abs(hess(i, i)), 1e-8 * n);
        direction(i) = -grad(i) / curvature;
      }
    }

    double t = 1.0;
    bool improved = false;
    Point candidate{};
    double f_candidate = fx;
    for (int trial = 0; trial < 40; ++trial, t *= 0.5) {
      candidate = project({x[0] + t * direction(0), x[1] + t * direction(1), x[2] + t * direction(2)});
      f_candidate = objective.value(candidate);
      if (f_candidate < fx) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    const double gain = fx - f_candidate;
    double moved = 0.0;
    for (int i = 0; i < 3; ++i) moved = std::max(moved, std::abs(candidate[i] - x[i]));
    x = candidate;
    fx = f_candidate;
    g = objective.gradient(x);
    if (gain <= 1e-14 * std::abs(fx) && moved <= 1e-12) break;
  }

  GarchFit fit;
  fit.params = to_params(x);
  fit.variance_path = filter_variance(series, fit.params);
  const double y_last = series.back();
  fit.variance_forecast = fit.params.omega + fit.params.alpha * y_last * y_last +
                          fit.params.beta * fit.variance_path.back();
  fit.loglik = -fx;
  fit.iterations = iterations;
  fit.on_persistence_cap = fit.params.persistence() >= kPersistenceCap * (1.0 - 1e-12);

  const Point pg = projected_gradient(x, objective.gradient(x));
  double pg_norm = 0.0;
  for (double v : pg) pg_norm = std::max(pg_norm, std::abs(v));
  fit.converged = std::isfinite(fx) && pg_norm <= 1e-4 * n && !fit.on_persistence_cap;
  return fit;
}

ResidualPanel filter_and_residualize(const Eigen::MatrixXd& losses, std::span<const GarchFit> fits,
                                     std::size_t ell_n, std::vector<std::string> margin_ids) {
  const auto rows = static_cast<std::size_t>(losses.rows());
  if (fits.size() != static_cast<std::size_t>(losses.cols()))
    throw DataError("filter_and_residualize: need one fit per margin");
  if (ell_n >= rows) throw DomainError("filter_and_residualize: clip length must be below the panel length");
  if (margin_ids.empty()) {
    for (std::size_t j = 0; j < fits.size(); ++j) margin_ids.push_back("m" + std::to_string(j));
  } else if (margin_ids.size() != fits.size()) {
    throw DataError("filter_and_residualize: need one id per margin");
  }

  ResidualPanel panel;
  panel.clipped = ell_n;
  panel.margin_ids = std::move(margin_ids);
  panel.residuals.resize(static_cast<Eigen::Index>(rows - ell_n), losses.cols());
  for (Eigen::Index j = 0; j < losses.cols(); ++j) {
    const auto& path = fits[static_cast<std::size_t>(j)].variance_path;
    if (path.size() != rows) throw DataError("filter_and_residualize: fit not aligned with panel");
    for (std::size_t t = ell_n; t < rows; ++t) {
      const double h = path[t];
      if (!(h > 0.0) || !std::isfinite(h))
        throw DataError("filter_and_residualize: nonpositive fitted volatility (corrupted fit)");
      const double e = losses(static_cast<Eigen::Index>(t), j) / std::sqrt(h);
      if (!std::isfinite(e)) throw DataError("filter_and_residualize: non-finite residual");
      panel.residuals(static_cast<Eigen::Index>(t - ell_n), j) = e;
    }
  }
  return panel;
}

}  // namespace tailmes::garch
