#include <benchmark/benchmark.h>

#include "tcomplete/geom.hpp"
#include "tcomplete/losses.hpp"
#include "tcomplete/rng.hpp"

using namespace tcomplete;

namespace {

PointCloud make_cloud(int n, std::uint64_t seed) {
    Rng rng(seed);
    PointMatrix pts(n, 3);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) pts(i, c) = rng.uniform(-0.5, 0.5);
    return PointCloud(std::move(pts));
}

}  // namespace

static void BM_FarthestPointSample(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const PointCloud cloud = make_cloud(n, 1);
    for (auto _ : state) benchmark::DoNotOptimize(farthest_point_sample(cloud, n / 2, 0));
}
BENCHMARK(BM_FarthestPointSample)->Arg(256)->Arg(1024)->Arg(2048);

static void BM_Chamfer(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const PointCloud x = make_cloud(n, 2);
    const PointCloud y = make_cloud(n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(chamfer(x, y));
}
BENCHMARK(BM_Chamfer)->Arg(256)->Arg(1024)->Arg(2048);

static void BM_ChamferGrad(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const PointCloud x = make_cloud(n, 2);
    const PointCloud y = make_cloud(n, 3);
    PointMatrix gx, gy;
    for (auto _ : state) benchmark::DoNotOptimize(chamfer_grad(x, y, gx, gy));
}
BENCHMARK(BM_ChamferGrad)->Arg(256)->Arg(1024);

static void BM_EmdExact(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const PointCloud x = make_cloud(n, 4);
    const PointCloud y = make_cloud(n, 5);
    for (auto _ : state) benchmark::DoNotOptimize(emd(x, y, EmdMode::Exact));
}
BENCHMARK(BM_EmdExact)->Arg(16)->Arg(64)->Arg(256);

static void BM_EmdApprox(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const PointCloud x = make_cloud(n, 4);
    const PointCloud y = make_cloud(n, 5);
    for (auto _ : state) benchmark::DoNotOptimize(emd(x, y, EmdMode::Approximate));
}
BENCHMARK(BM_EmdApprox)->Arg(64)->Arg(256)->Arg(1024);

static void BM_BallQuery(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const PointCloud source = make_cloud(n, 6);
    const PointCloud centers(PointCloud(source).prefix(n / 4));
    for (auto _ : state) benchmark::DoNotOptimize(ball_query(centers, source, 0.1, 16));
}
BENCHMARK(BM_BallQuery)->Arg(256)->Arg(1024);

static void BM_KnnAdjacency(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const PointCloud cloud = make_cloud(n, 7);
    for (auto _ : state) benchmark::DoNotOptimize(knn_adjacency(cloud, 8));
}
BENCHMARK(BM_KnnAdjacency)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
