#include <benchmark/benchmark.h>

#include <random>

#include "ynetr/ops.hpp"
#include "ynetr/tensor.hpp"
#include "ynetr/wavelet.hpp"

using namespace ynetr;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor t(shape);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

// Args: channels in, channels out, spatial extent.
void BM_Conv3dForward(benchmark::State& state) {
    const int cin = state.range(0), cout = state.range(1), n = state.range(2);
    const Tensor x = random_tensor({cin, n, n, n}, 1), w = random_tensor({cout, cin, 3, 3, 3}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(conv3d(x, w, {}, 1, 1));
    state.SetItemsProcessed(state.iterations() * std::int64_t(cin) * cout * 27 * n * n * n);
}
BENCHMARK(BM_Conv3dForward)->Args({8, 8, 32})->Args({16, 16, 32})->Args({64, 64, 8})->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
    const int cin = state.range(0), cout = state.range(1), n = state.range(2);
    Tensor x = random_tensor({cin, n, n, n}, 1), w = random_tensor({cout, cin, 3, 3, 3}, 2);
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    for (auto _ : state) {
        Tape tape;
        TapeScope scope(tape);
        const Tensor loss = sum(conv3d(x, w, {}, 1, 1));
        backward(tape, loss);
        benchmark::DoNotOptimize(w.grad());
    }
}
BENCHMARK(BM_Conv3dBackward)->Args({8, 8, 32})->Args({16, 16, 32})->Unit(benchmark::kMillisecond);

void BM_ConvTranspose3d(benchmark::State& state) {
    const int c = state.range(0), n = state.range(1);
    const Tensor x = random_tensor({c, n, n, n}, 3), w = random_tensor({c, c / 2, 2, 2, 2}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(conv_transpose3d(x, w, {}, 2, 0));
}
BENCHMARK(BM_ConvTranspose3d)->Args({32, 8})->Args({16, 16})->Unit(benchmark::kMillisecond);

void BM_Matmul(benchmark::State& state) {
    const int n = state.range(0);
    const Tensor a = random_tensor({n, n}, 5), b = random_tensor({n, n}, 6);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * std::int64_t(n) * n * n);
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(64, 512)->Unit(benchmark::kMicrosecond);

void BM_SplitFrequency(benchmark::State& state) {
    const int n = state.range(0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Volume3D v(Extent3{n, n, n}, Spacing{});
    for (auto& x : v.buffer()) x = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(split_frequency(v));
    state.SetItemsProcessed(state.iterations() * std::int64_t(n) * n * n);
}
BENCHMARK(BM_SplitFrequency)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
