#include <benchmark/benchmark.h>

#include "flowvid/corruption.hpp"
#include "flowvid/predictor.hpp"
#include "flowvid/rollout.hpp"
#include "flowvid/samplers.hpp"
#include "flowvid/synthetic.hpp"

using namespace flowvid;

namespace {

SyntheticProcess desk_process() { return SyntheticProcess::cyclic_shift(3, 2, 0.05); }

void BM_Corrupt(benchmark::State& state) {
    const auto proc = desk_process();
    Rng rng(1);
    const TokenVideo video = gen_video(proc, 16, rng);
    const Chunk chunk = slice_chunk(video, 0, 16);
    const MaskSchedule schedule = MaskSchedule::linear();
    for (auto _ : state) {
        const TimestepVector t = sample_timestep_vector(16, 2, rng);
        benchmark::DoNotOptimize(corrupt(chunk, t, schedule, proc.vocab, rng));
    }
}
BENCHMARK(BM_Corrupt);

void BM_OracleChunk(benchmark::State& state) {
    const auto proc = desk_process();
    OraclePredictor oracle(proc);
    Rng rng(2);
    const TokenVideo ctx = gen_video(proc, 1, rng);
    const SamplerConfig cfg = SamplerConfig::mgm(6);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            mgm_sample_chunk(oracle, ctx.frames, 4, cfg, proc.vocab, rng));
}
BENCHMARK(BM_OracleChunk);

void BM_RolloutMgm(benchmark::State& state) {
    const auto proc = desk_process();
    OraclePredictor oracle(proc);
    Rng rng(3);
    const TokenVideo ctx = gen_video(proc, 1, rng);
    const SamplerConfig cfg = SamplerConfig::mgm(6);
    const std::size_t L = static_cast<std::size_t>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(
            rollout_video(oracle, cfg, ctx.frames, L, 4, 3, proc.vocab, rng));
}
BENCHMARK(BM_RolloutMgm)->Arg(16)->Arg(64);

void BM_TabularPredict(benchmark::State& state) {
    const auto proc = desk_process();
    TabularPredictor model(proc.vocab, 4);
    Rng rng(4);
    const TokenVideo video = gen_video(proc, 4, rng);
    Chunk chunk = slice_chunk(video, 0, 4);
    chunk.context_count = 1;
    const TimestepVector t = TimestepVector::constant(4, 0.5);
    for (auto _ : state)
        benchmark::DoNotOptimize(model.predict(chunk, t));
}
BENCHMARK(BM_TabularPredict);

} // namespace

BENCHMARK_MAIN();
