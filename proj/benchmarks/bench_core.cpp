#include <benchmark/benchmark.h>

#include <vector>

#include "rbfit/coo.hpp"
#include "rbfit/data.hpp"
#include "rbfit/kdtree.hpp"
#include "rbfit/kernel.hpp"
#include "rbfit/solver.hpp"

using namespace rbfit;

namespace {

void bm_kernel_evaluate(benchmark::State& state) {
    const KernelSpec kernel(static_cast<KernelFamily>(state.range(0)), 2.0);
    double r = 0.0;
    for (auto _ : state) {
        r += 1e-7;
        if (r > 0.5) r = 0.0;
        benchmark::DoNotOptimize(kernel.evaluate(r));
    }
}
BENCHMARK(bm_kernel_evaluate)->Arg(0)->Arg(1)->Arg(2);

void bm_radius_query(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PointIndex index(halton_2d(n));
    const double radius = 0.05;
    std::vector<PointIndex::Neighbor> hits;
    std::size_t q = 0;
    const auto centers = halton_2d(512);
    for (auto _ : state) {
        index.radius_query(centers[q++ & 511], radius, hits);
        benchmark::DoNotOptimize(hits.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_radius_query)->Arg(10000)->Arg(100000)->Arg(1000000);

void bm_assemble_block(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PointIndex index(halton_2d(n));
    const std::vector<Point2> refs =
        uniform_grid_refs(Aabb{{0.0, 0.0}, {1.0, 1.0}}, 100);
    const KernelSpec kernel(KernelFamily::wendland_3_1, 16.0);
    for (auto _ : state) {
        const CooMatrix a = assemble_submatrix(index, refs, kernel);
        benchmark::DoNotOptimize(a.nnz());
    }
}
BENCHMARK(bm_assemble_block)->Arg(100000)->Arg(1000000);

void bm_gram_block(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PointIndex index(halton_2d(n));
    const std::vector<Point2> refs =
        uniform_grid_refs(Aabb{{0.0, 0.0}, {1.0, 1.0}}, 100);
    const KernelSpec kernel(KernelFamily::wendland_3_1, 16.0);
    const CooMatrix a = assemble_submatrix(index, refs, kernel);
    for (auto _ : state) {
        const DenseBlock b = coo_gram_block(a, a);
        benchmark::DoNotOptimize(b.data.data());
    }
}
BENCHMARK(bm_gram_block)->Arg(100000)->Arg(1000000);

void bm_fit_block_size(benchmark::State& state) {
    static const PointCloud cloud = make_franke_cloud(200000);
    static const std::vector<Point2> refs =
        uniform_grid_refs(Aabb{{0.0, 0.0}, {1.0, 1.0}}, 400);
    const KernelSpec kernel(KernelFamily::wendland_3_1, 16.0);
    FitOptions options;
    options.block_size = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        const Model model = fit(cloud, refs, kernel, options);
        benchmark::DoNotOptimize(model.weights.data());
    }
}
BENCHMARK(bm_fit_block_size)->Arg(50)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
