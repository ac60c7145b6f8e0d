#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tailmes/distributions.hpp"
#include "tailmes/evt.hpp"
#include "tailmes/garch.hpp"
#include "tailmes/simlab.hpp"
#include "tailmes/tail_dependence.hpp"

using namespace tailmes;

namespace {

std::vector<double> student(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::student_t_distribution<double> t(3.0);
  std::vector<double> v(n);
  for (double& x : v) x = t(gen);
  return v;
}

std::vector<double> garch_path(std::size_t n) {
  dist::InnovationSpec spec;
  spec.marginals.assign(1, dist::BurrParams{0.25, 20.0});
  spec.copula = dist::equicorrelated_copula(3.0, 0.0, 1);
  const garch::GarchParams g{0.001, 0.1, 0.85};
  const garch::GarchParams gs[] = {g};
  const double s0[] = {std::sqrt(g.unconditional_variance())};
  const auto path = garch::simulate_ccc(gs, dist::sample_innovations(spec, n, 3), s0);
  return {path.losses.data(), path.losses.data() + path.losses.rows()};
}

}  // namespace

static void BM_Hill(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto v = student(n, 1);
  const std::size_t k = evt::k_rule(n);
  for (auto _ : state) benchmark::DoNotOptimize(evt::hill(v, k));
}
BENCHMARK(BM_Hill)->Arg(1000)->Arg(100'000);

static void BM_MesWithin(benchmark::State& state) {
  const auto x = student(1000, 2), y = student(1000, 3);
  for (auto _ : state) benchmark::DoNotOptimize(evt::mes_within(x, y, 227));
}
BENCHMARK(BM_MesWithin);

static void BM_RHatPair(benchmark::State& state) {
  const auto x = student(1000, 4), y = student(1000, 5);
  for (auto _ : state) benchmark::DoNotOptimize(tail::r_hat_pair(x, y, 227, 227, 227));
}
BENCHMARK(BM_RHatPair);

static void BM_QmleFit(benchmark::State& state) {
  const auto y = garch_path(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(garch::qmle_fit(y));
}
BENCHMARK(BM_QmleFit)->Arg(510)->Arg(1010)->Unit(benchmark::kMillisecond);

static void BM_ThetaQuadrature(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(sim::theta_quadrature(3.0, 0.95, dist::BurrParams{0.25, 20.0}, 1e-4));
}
BENCHMARK(BM_ThetaQuadrature)->Unit(benchmark::kMillisecond);

static void BM_TQuantile(benchmark::State& state) {
  double u = 0.0;
  for (auto _ : state) {
    u = u > 0.98 ? 0.01 : u + 0.013;
    benchmark::DoNotOptimize(dist::t_quantile(u, 4.0));
  }
}
BENCHMARK(BM_TQuantile);

BENCHMARK_MAIN();
