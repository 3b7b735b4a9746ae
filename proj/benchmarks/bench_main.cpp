#include <benchmark/benchmark.h>

#include "bfrog/frogsim.hpp"
#include "bfrog/motion.hpp"
#include "bfrog/percolation.hpp"
#include "bfrog/pointprocess.hpp"

using namespace bfrog;

namespace {

PointSet field(int dim, double side, std::uint64_t seed) {
    Rng rng(seed);
    return sample_ppp(Region::centered_cube(dim, side), 1.0, rng);
}

void BM_GridQuery(benchmark::State& state) {
    const auto ps = field(2, 200.0, 1);
    const SpatialGrid grid(ps, 1.0);
    const double rho = static_cast<double>(state.range(0)) / 4.0;
    Rng rng(2);
    for (auto _ : state) {
        const Point x{rng.uniform(-90, 90), rng.uniform(-90, 90), 0};
        benchmark::DoNotOptimize(grid.query_within(x, rho));
    }
}
BENCHMARK(BM_GridQuery)->Arg(2)->Arg(4)->Arg(12);

void BM_BruteForceQuery(benchmark::State& state) {
    const auto ps = field(2, 200.0, 1);
    Rng rng(2);
    for (auto _ : state) {
        const Point x{rng.uniform(-90, 90), rng.uniform(-90, 90), 0};
        benchmark::DoNotOptimize(brute_force_within(ps.points, x, 1.0));
    }
}
BENCHMARK(BM_BruteForceQuery);

void BM_Clusters(benchmark::State& state) {
    const auto ps = field(2, static_cast<double>(state.range(0)), 3);
    for (auto _ : state) benchmark::DoNotOptimize(clusters(ps, 1.0));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ps.points.size()));
}
BENCHMARK(BM_Clusters)->Arg(50)->Arg(200)->Arg(500);

void BM_SpongeCrossing(benchmark::State& state) {
    const double n = static_cast<double>(state.range(0));
    Rng rng(4);
    const auto ps = sample_ppp(Region::box(2, {0, 0, 0}, {n, 3 * n, 0}), 1.0, rng);
    const CrossingSpec spec{{0, 0, 0}, {n, 3 * n, 0}, 1.2};
    for (auto _ : state) benchmark::DoNotOptimize(sponge_crossing_exists(ps, spec));
}
BENCHMARK(BM_SpongeCrossing)->Arg(10)->Arg(40);

// One hitting-time walk started at distance 1 from a unit ball.
void BM_HittingWalk(benchmark::State& state) {
    const std::vector<Point> center{Point{}};
    const SpatialGrid grid(2, center, 1.0);
    StepPolicy pol;
    std::uint64_t i = 0;
    for (auto _ : state) {
        Rng rng(derive_seed(6, i++));
        benchmark::DoNotOptimize(simulate_until_hit(Point{2.0, 0, 0}, grid, 1.0, 5.0, pol, rng));
    }
}
BENCHMARK(BM_HittingWalk);

void BM_FrogsimAdvance(benchmark::State& state) {
    SimParams p;
    p.dim = 2;
    p.box_side = 120.0;
    p.r = 0.84;
    for (auto _ : state) {
        p.seed = static_cast<std::uint64_t>(state.iterations()) + 1;
        Simulation sim(p);
        benchmark::DoNotOptimize(sim.advance(static_cast<double>(state.range(0))));
    }
}
BENCHMARK(BM_FrogsimAdvance)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
