#include "msw/critical.hpp"
#include "msw/foldtest.hpp"
#include "msw/homology.hpp"
#include "msw/orbits.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace msw;

static void field_gradient(benchmark::State& state) {
    const auto p = default_problem();
    Vec3 y(0.3, 1.7, 0.4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_F(p, y, 2.0));
        y[0] += 1e-7;
    }
}
BENCHMARK(field_gradient);

static void crit_search(benchmark::State& state) {
    const auto p = default_problem();
    for (auto _ : state) benchmark::DoNotOptimize(find_crit_F(p));
}
BENCHMARK(crit_search)->Unit(benchmark::kMillisecond);

static void level_set(benchmark::State& state) {
    const auto p = default_problem();
    for (auto _ : state) benchmark::DoNotOptimize(trace_level_set(p));
}
BENCHMARK(level_set)->Unit(benchmark::kMillisecond);

static void gf2_rank(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::mt19937_64 rng(5);
    Z2Matrix m(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) m.set(r, c, rng() & 1);
    for (auto _ : state) benchmark::DoNotOptimize(z2_reduce(m).rank);
}
BENCHMARK(gf2_rank)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

static void fold_model(benchmark::State& state) {
    const double eps = std::pow(10.0, -static_cast<double>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(fold_exit(eps, 0.1).rho);
}
BENCHMARK(fold_model)->DenseRange(2, 5)->Unit(benchmark::kMillisecond);

static void shooting(benchmark::State& state) {
    auto p = default_problem();
    const auto crits = find_crit_F(p);
    p.eta_max = eta_bound(p, crits);
    int source = 0;
    for (const auto& c : crits)
        if (c.index_F == 2) source = c.id;
    const double lambda = static_cast<double>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(shoot_unstable_manifold(p, crits, lambda, source).crossings.size());
}
BENCHMARK(shooting)->Arg(1)->Arg(8)->Iterations(1)->Unit(benchmark::kSecond);

BENCHMARK_MAIN();
