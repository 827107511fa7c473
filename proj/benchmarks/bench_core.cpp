#include <benchmark/benchmark.h>

#include "mkv/flow.hpp"
#include "mkv/measure.hpp"
#include "mkv/particles.hpp"
#include "mkv/potential.hpp"
#include "mkv/tilt.hpp"

namespace {

const mkv::PotentialSpec& spec() {
    static mkv::PotentialSpec s = mkv::make_quartic(0.25, -0.5, 1.5, 4.0);
    return s;
}

mkv::Grid grid(std::size_t n) { return mkv::Grid(n, 4.0); }

void BM_Wasserstein2(benchmark::State& state) {
    auto g = grid(std::size_t(state.range(0)));
    auto a = mkv::gaussian_init(g, 0.3, 0.5);
    auto b = mkv::gaussian_init(g, -0.4, 0.3);
    for (auto _ : state) benchmark::DoNotOptimize(mkv::wasserstein2(a, b));
}
BENCHMARK(BM_Wasserstein2)->Arg(400)->Arg(1600);

void BM_MetricSlope(benchmark::State& state) {
    auto g = grid(std::size_t(state.range(0)));
    auto mu = mkv::gaussian_init(g, 0.3, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(mkv::metric_slope_sq(spec(), mu));
}
BENCHMARK(BM_MetricSlope)->Arg(400)->Arg(1600);

void BM_FpStep(benchmark::State& state) {
    auto g = grid(std::size_t(state.range(0)));
    auto mu = mkv::gaussian_init(g, 0.3, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(mkv::fp_step(spec(), mu, 1e-3));
}
BENCHMARK(BM_FpStep)->Arg(400)->Arg(1600);

void BM_EvolveTenth(benchmark::State& state) {
    auto g = grid(400);
    auto mu = mkv::gaussian_init(g, 0.3, 0.5);
    mkv::FlowParams p;
    p.t_max = 0.1;
    p.stationarity_tol = 1e-300;
    p.record_every = 100;
    p.lambda = -2.5;
    for (auto _ : state) benchmark::DoNotOptimize(mkv::evolve(spec(), mu, p));
}
BENCHMARK(BM_EvolveTenth);

void BM_JkoQuantileStep(benchmark::State& state) {
    auto g = grid(400);
    auto q = mkv::quantiles_from_grid(mkv::gaussian_init(g, 0.3, 0.5), 400);
    for (auto _ : state)
        benchmark::DoNotOptimize(mkv::jko_quantile_step(spec(), q, 0.02));
}
BENCHMARK(BM_JkoQuantileStep);

void BM_EmStep(benchmark::State& state) {
    auto g = grid(400);
    auto ens = mkv::init_ensemble(mkv::gaussian_init(g, 0.3, 0.5),
                                  std::size_t(state.range(0)), 1);
    for (auto _ : state) {
        ens = mkv::em_step(spec(), ens, 1e-3);
        benchmark::DoNotOptimize(ens.x.data());
    }
}
BENCHMARK(BM_EmStep)->Arg(1000)->Arg(10000);

void BM_Legendre(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(mkv::legendre(spec(), 0.7));
}
BENCHMARK(BM_Legendre);

void BM_FreeEnergy(benchmark::State& state) {
    auto mu = mkv::gaussian_init(grid(400), 0.3, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(mkv::free_energy(spec(), mu));
}
BENCHMARK(BM_FreeEnergy);

}  // namespace

BENCHMARK_MAIN();
