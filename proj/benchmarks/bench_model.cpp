#include <benchmark/benchmark.h>

#include <random>

#include "ynetr/inference.hpp"
#include "ynetr/losses.hpp"
#include "ynetr/model.hpp"
#include "ynetr/optim.hpp"

using namespace ynetr;

namespace {

// The overfit configuration: 32^3 input, E=64, 12 layers, narrow decoder.
ModelConfig tiny_config() {
    ModelConfig c;
    c.input_dims = {32, 32, 32};
    c.embed_dim = 64;
    c.depth = 12;
    c.num_heads = 4;
    c.decoder_channels = {64, 64, 32, 16, 8};
    c.zero_init_classifier = false;
    c.seed = 1;
    return c;
}

Tensor random_input(const ModelConfig& c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Tensor t(Shape{1, c.input_dims[0], c.input_dims[1], c.input_dims[2]});
    for (auto& v : t.data()) v = u(rng);
    return t;
}

void BM_TinyForward(benchmark::State& state) {
    const ModelConfig c = tiny_config();
    const YNetr m(c);
    const Tensor lf = random_input(c, 1), hf = random_input(c, 2);
    for (auto _ : state) benchmark::DoNotOptimize(m.forward(lf, hf));
}
BENCHMARK(BM_TinyForward)->Unit(benchmark::kMillisecond);

void BM_TinyTrainStep(benchmark::State& state) {
    const ModelConfig c = tiny_config();
    YNetr m(c);
    AdamW opt(m.parameters(), AdamWConfig{1e-3f, 0.01f});
    const Tensor lf = random_input(c, 1), hf = random_input(c, 2);
    Tensor labels(Shape{32, 32, 32});
    for (std::int64_t i = 0; i < labels.numel(); i += 7) labels.data()[i] = 1.0f;
    for (auto _ : state) {
        opt.zero_grad();
        Tape tape;
        {
            TapeScope scope(tape);
            const LossTerms loss = segmentation_loss(labels, m.forward(lf, hf), LossConfig{});
            backward(tape, loss.total);
        }
        opt.step();
    }
}
BENCHMARK(BM_TinyTrainStep)->Unit(benchmark::kMillisecond);

// Forward pass of the 64^3 shape-suite model with a given first decoder width.
void BM_Forward64(benchmark::State& state) {
    ModelConfig c;
    c.input_dims = {64, 64, 64};
    c.embed_dim = 96;
    c.depth = 12;
    c.num_heads = 4;
    const int w = state.range(0);
    c.decoder_channels = {w, w, w / 2, w / 4, w / 8};
    const YNetr m(c);
    const Tensor lf = random_input(c, 3), hf = random_input(c, 4);
    for (auto _ : state) benchmark::DoNotOptimize(m.forward(lf, hf));
}
BENCHMARK(BM_Forward64)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_SlidingWindow(benchmark::State& state) {
    ModelConfig c = tiny_config();
    const YNetr m(c);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Volume3D v(Extent3{48, 48, 40}, Spacing{});
    for (auto& x : v.buffer()) x = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(infer_volume(m, v));
}
BENCHMARK(BM_SlidingWindow)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
