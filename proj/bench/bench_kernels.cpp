// Serial reference vs OpenMP kernels.
//
//   mflow_bench --benchmark_filter=Saturate
//
// Set OMP_NUM_THREADS to vary the parallel width.

#include <benchmark/benchmark.h>

#include "mflow/attain.hpp"
#include "mflow/marcus.hpp"

namespace {

using namespace mflow;

void saturate_kernel(benchmark::State& state, Exec exec)
{
    const int n = static_cast<int>(state.range(0));
    const Raster r{-3.0, 3.0, -3.0, 3.0, n, n};
    const auto pair = hyperbolic_pair();
    const Mask ex = excluded_mask(r, pair);
    const Mask seed = saturate_point({0.5, 0.7}, pair.vertical, r, ex);
    for (auto _ : state) benchmark::DoNotOptimize(saturate(seed, pair.horizontal, r, ex, exec));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * n * n);
}

void BM_SaturateSerial(benchmark::State& state) { saturate_kernel(state, Exec::serial); }
void BM_SaturateParallel(benchmark::State& state) { saturate_kernel(state, Exec::parallel); }
BENCHMARK(BM_SaturateSerial)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SaturateParallel)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

struct SolveSetup {
    FieldPtr field = make_field(catalog_field(CatalogName::van_der_pol, 0.5));
    DriverPath z = brownian_with_jumps(1, 1.0, 1e-3, {0.25, 0.5, 0.75},
                                       {Vec::Constant(1, 0.5), Vec::Constant(1, -0.4), Vec::Constant(1, 0.3)});
    std::vector<Vec> x0s;
    explicit SolveSetup(int count)
    {
        for (int k = 0; k < count; ++k) x0s.push_back(Vec::LinSpaced(2, -1.0 + 0.01 * k, 1.0 - 0.01 * k));
    }
};

void BM_SolveSerial(benchmark::State& state)
{
    const SolveSetup s(static_cast<int>(state.range(0)));
    SolveOptions opts;
    opts.keep_samples = false;
    for (auto _ : state)
        for (const auto& x0 : s.x0s) benchmark::DoNotOptimize(solve_path(*s.field, s.z, x0, opts));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}

void BM_SolveParallel(benchmark::State& state)
{
    const SolveSetup s(static_cast<int>(state.range(0)));
    SolveOptions opts;
    opts.keep_samples = false;
    for (auto _ : state) benchmark::DoNotOptimize(solve_many(*s.field, s.z, s.x0s, opts));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_SolveSerial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveParallel)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
