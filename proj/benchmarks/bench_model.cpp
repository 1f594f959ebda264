#include <benchmark/benchmark.h>

#include "tcomplete/ad.hpp"
#include "tcomplete/config.hpp"
#include "tcomplete/model.hpp"
#include "tcomplete/rng.hpp"

using namespace tcomplete;

namespace {

PointCloud make_frame(int n, std::uint64_t seed) {
    Rng rng(seed);
    PointMatrix pts(n, 3);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) pts(i, c) = rng.uniform(-0.5, 0.5);
    return PointCloud(std::move(pts));
}

}  // namespace

static void BM_Stage1Forward(benchmark::State& state) {
    model::CompletionModel net(desk_profile(), 1);
    const PointCloud frame = make_frame(net.config().encoder.n, 2);
    for (auto _ : state) {
        ad::Tape tape;
        net.params().begin_step(tape);
        benchmark::DoNotOptimize(net.stage1_forward(tape, frame));
    }
}
BENCHMARK(BM_Stage1Forward)->Unit(benchmark::kMillisecond);

static void BM_StreamFrame(benchmark::State& state) {
    model::CompletionModel net(desk_profile(), 1);
    const PointCloud frame = make_frame(net.config().encoder.n, 3);
    auto temporal = net.make_state();
    std::int64_t index = 0;
    for (auto _ : state) {
        ad::Tape tape;
        net.params().begin_step(tape);
        benchmark::DoNotOptimize(net.process_frame(tape, frame, temporal, index++, true));
    }
}
BENCHMARK(BM_StreamFrame)->Unit(benchmark::kMillisecond);

static void BM_FrameBackward(benchmark::State& state) {
    model::CompletionModel net(desk_profile(), 1);
    const PointCloud frame = make_frame(net.config().encoder.n, 4);
    const PointCloud target = make_frame(net.config().encoder.n, 5);
    for (auto _ : state) {
        ad::Tape tape;
        net.params().begin_step(tape);
        auto temporal = net.make_state();
        const auto res = net.process_frame(tape, frame, temporal, 0, false);
        const int leaf = tape.leaf(target.pts);
        tape.backward(tape.chamfer_pair(res.s2.p_f_node, leaf));
        benchmark::DoNotOptimize(tape.grad(res.s2.p_f_node));
    }
}
BENCHMARK(BM_FrameBackward)->Unit(benchmark::kMillisecond);
