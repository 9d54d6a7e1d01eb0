#include <benchmark/benchmark.h>

#include "fundus/models.hpp"
#include "fundus/ops.hpp"
#include "fundus/rng.hpp"

using namespace fundus;

namespace {

ConvSpec spec_3x3(std::size_t in, std::size_t out, std::size_t dilation = 1) {
    ConvSpec s;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel_h = s.kernel_w = 3;
    s.pad_h = s.pad_w = dilation;
    s.dilation_h = s.dilation_w = dilation;
    return s;
}

void bm_conv2d_forward(benchmark::State& state) {
    const std::size_t dilation = std::size_t(state.range(0));
    SplitMix64 rng(1);
    const ConvSpec spec = spec_3x3(16, 16, dilation);
    const Tensor x = Tensor::random_uniform({1, 16, 64, 64}, -1, 1, rng);
    const Tensor w = Tensor::random_uniform({16, 16, 3, 3}, -0.1, 0.1, rng);
    const Tensor b = Tensor::random_uniform({16}, -0.1, 0.1, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d(x, w, b, spec));
    }
}
BENCHMARK(bm_conv2d_forward)->Arg(1)->Arg(2)->Arg(4);

void bm_conv2d_backward(benchmark::State& state) {
    SplitMix64 rng(2);
    const ConvSpec spec = spec_3x3(16, 16);
    const Tensor x = Tensor::random_uniform({1, 16, 64, 64}, -1, 1, rng);
    const Tensor w = Tensor::random_uniform({16, 16, 3, 3}, -0.1, 0.1, rng);
    const Tensor g = Tensor::random_uniform({1, 16, 64, 64}, -1, 1, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_backward(x, w, spec, g));
    }
}
BENCHMARK(bm_conv2d_backward);

void bm_conv2d_transpose(benchmark::State& state) {
    SplitMix64 rng(3);
    const Tensor x = Tensor::random_uniform({1, 16, 32, 32}, -1, 1, rng);
    const Tensor w = Tensor::random_uniform({16, 16, 2, 2}, -0.1, 0.1, rng);
    const Tensor b = Tensor::random_uniform({16}, -0.1, 0.1, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_transpose(x, w, b, 2, 2, 0, 0));
    }
}
BENCHMARK(bm_conv2d_transpose);

void bm_xunet_forward(benchmark::State& state) {
    SplitMix64 rng(4);
    XUnet model(XUnetConfig{}, 0);
    const Tensor x = Tensor::random_uniform({1, 3, 64, 64}, 0, 1, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(x));
    }
}
BENCHMARK(bm_xunet_forward)->Unit(benchmark::kMillisecond);

void bm_classifier_forward(benchmark::State& state) {
    SplitMix64 rng(5);
    Classifier model(ClassifierConfig{}, 0);
    const Tensor x = Tensor::random_uniform({1, 3, 64, 64}, 0, 1, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(x));
    }
}
BENCHMARK(bm_classifier_forward)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
