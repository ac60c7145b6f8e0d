#include "tailmes/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/tools/minima.hpp>

namespace tailmes::numeric {

namespace {

double finite_or_inf(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                          std::vector<double> start, const std::vector<double>& step,
                          const SimplexOptions& options) {
  const std::size_t dim = start.size();
  std::vector<std::vector<double>> simplex(dim + 1, start);
  for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += step[i];

  std::vector<double> values(dim + 1);
  std::size_t evaluations = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evaluations;
    return finite_or_inf(objective(x));
  };
  for (std::size_t i = 0; i <= dim; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim), trial(dim), trial2(dim);
  bool converged = false;

  while (evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[dim - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        diameter = std::max(diameter, std::abs(simplex[i][j] - simplex[best][j]));
    const double spread = values[worst] - values[best];
    if (std::isfinite(spread) &&
        spread <= options.f_tolerance * (std::abs(values[best]) + options.f_tolerance) &&
        diameter <= options.x_tolerance) {
      converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < dim; ++j) centroid[j] += simplex[i][j];
    }
    for (auto& c : centroid) c /= static_cast<double>(dim);

    for (std::size_t j = 0; j < dim; ++j)
      trial[j] = centroid[j] + (centroid[j] - simplex[worst][j]);
    const double reflected = eval(trial);

    if (reflected < values[best]) {
      for (std::size_t j = 0; j < dim; ++j)
        trial2[j] = centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]);
      const double expanded = eval(trial2);
      if (expanded < reflected) {
        simplex[worst] = trial2;
        values[worst] = expanded;
      } else {
        simplex[worst] = trial;
        values[worst] = reflected;
      }
      continue;
    }
    if (reflected < values[second_worst]) {
      simplex[worst] = trial;
      values[worst] = reflected;
      continue;
    }

    const bool outside = reflected < values[worst];
    for (std::size_t j = 0; j < dim; ++j) {
      trial2[j] = outside ? centroid[j] + 0.5 * (trial[j] - centroid[j])
                          : centroid[j] + 0.5 * (simplex[worst][j] - centroid[j]);
    }
    const double contracted = eval(trial2);
    if (contracted < std::min(reflected, values[worst])) {
      simplex[worst] = trial2;
      values[worst] = contracted;
      continue;
    }

    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < dim; ++j)
        simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
      values[i] = eval(simplex[i]);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best_index = static_cast<std::size_t>(best_it - values.begin());
  return SimplexResult{simplex[best_index], *best_it, evaluations, converged};
}

Brent1dResult brent_minimize(const std::function<double(double)>& objective, double lo, double hi,
                             double x_tolerance, std::size_t max_evaluations) {
  std::uintmax_t iterations = max_evaluations;
  // Bits of precision equivalent to the requested absolute tolerance on a unit scale.
  const int bits = std::clamp(static_cast<int>(-std::log2(x_tolerance)), 8, 52);
  auto wrapped = [&](double x) { return finite_or_inf(objective(x)); };
  const auto [x, fx] = boost::math::tools::brent_find_minima(wrapped, lo, hi, bits, iterations);
  return Brent1dResult{x, fx, static_cast<std::size_t>(iterations)};
}

HalfLineRule::HalfLineRule(double step, double t_min, double t_max) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  for (double t = t_min; t <= t_max + 0.5 * step; t += step) {
    const double x = std::exp(half_pi * std::sinh(t));
    const double w = step * half_pi * std::cosh(t) * x;
    if (x <= 0.0 || !std::isfinite(x) || !std::isfinite(w)) continue;
    nodes_.push_back(x);
    weights_.push_back(w);
  }
}

UnitIntervalRule::UnitIntervalRule(double step, double t_max) {
  const double pi = std::numbers::pi;
  const auto count = static_cast<long>(std::floor(t_max / step));
  for (long i = -count; i <= count; ++i) {
    const double t = static_cast<double>(i) * step;
    const double s = pi * std::sinh(t);
    const double x = 1.0 / (1.0 + std::exp(-s));
    const double xc = 1.0 / (1.0 + std::exp(s));
    const double w = step * pi * std::cosh(t) * x * xc;
    if (x <= 0.0 || xc <= 0.0 || w <= 0.0) continue;
    nodes_.push_back(x);
    complements_.push_back(xc);
    weights_.push_back(w);
  }
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TAILMES_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace tailmes::numeric
