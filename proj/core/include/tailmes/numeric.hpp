#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace tailmes::numeric {

struct SimplexOptions {
  std::size_t max_evaluations = 4000;
  // Stop when the spread of function values across the simplex falls below
  // f_tolerance * (|f_best| + f_tolerance) and the simplex diameter below x_tolerance.
  double f_tolerance = 1e-12;
  double x_tolerance = 1e-9;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

// Nelder-Mead minimizer with the standard reflection/expansion/contraction/
// shrink coefficients (1, 2, 1/2, 1/2). `step` gives the initial edge length
// per coordinate. Non-finite objective values are treated as +infinity.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                          std::vector<double> start, const std::vector<double>& step,
                          const SimplexOptions& options = {});

struct Brent1dResult {
  double x = 0.0;
  double value = 0.0;
  std::size_t evaluations = 0;
};

// Brent's derivative-free minimization on [lo, hi].
Brent1dResult brent_minimize(const std::function<double(double)>& objective, double lo, double hi,
                             double x_tolerance = 1e-8, std::size_t max_evaluations = 200);

// Fixed-step double-exponential rules. Nodes are computed once so the same
// rule can be reused across many integrands.
//
// HalfLineRule integrates over (0, inf) with the exp-sinh map
// x = exp(pi/2 sinh t); suited to integrands with an algebraic endpoint
// singularity at 0 and algebraic decay at infinity.
class HalfLineRule {
 public:
  explicit HalfLineRule(double step = 1.0 / 12.0, double t_min = -4.5, double t_max = 4.0);

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) sum += weights_[i] * f(nodes_[i]);
    return sum;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

// UnitIntervalRule integrates over (0, 1) with the tanh-sinh map. Besides the
// node x it stores 1 - x exactly, so integrands that need the distance to the
// right endpoint do not lose precision near 1.
class UnitIntervalRule {
 public:
  explicit UnitIntervalRule(double step = 1.0 / 16.0, double t_max = 3.6);

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& complements() const noexcept { return complements_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  // f receives (x, 1 - x).
  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      sum += weights_[i] * f(nodes_[i], complements_[i]);
    return sum;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> complements_;
  std::vector<double> weights_;
};

// Runs body(i) for i in [0, count) on up to `threads` worker threads.
// The first exception thrown by any task is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min(threads, count);
  pool.reserve(n);
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// Worker count from an explicit request, falling back to TAILMES_THREADS and
// then to the hardware concurrency. Never returns 0.
std::size_t resolve_threads(std::size_t requested = 0);

}  // namespace tailmes::numeric
