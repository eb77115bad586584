// Serial reference kernels against the OpenMP kernels, plus per-sample
// forward/backward passes at the desk profile.

#include <benchmark/benchmark.h>

#include "absnet/kernels.hpp"
#include "absnet/model.hpp"
#include "absnet/rng.hpp"

namespace {

using namespace absnet;

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    return v;
}

// args: in_channels, out_channels, side, stride
kernels::ConvShape conv_shape(const benchmark::State& st) {
    return {int(st.range(0)), int(st.range(1)), int(st.range(2)), int(st.range(2)), int(st.range(3))};
}

template <bool Fast>
void BM_ConvForward(benchmark::State& st) {
    const auto s = conv_shape(st);
    const auto in = random_values(std::size_t(s.in_channels) * s.height * s.width, 1);
    const auto w = random_values(s.weight_size(), 2);
    const auto b = random_values(std::size_t(s.out_channels), 3);
    std::vector<float> out(std::size_t(s.out_channels) * s.out_height() * s.out_width());
    for (auto _ : st) {
        if constexpr (Fast)
            kernels::fast::conv3x3_forward<float>(s, in, w, b, out);
        else
            kernels::ref::conv3x3_forward<float>(s, in, w, b, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <bool Fast>
void BM_ConvBackward(benchmark::State& st) {
    const auto s = conv_shape(st);
    const auto in = random_values(std::size_t(s.in_channels) * s.height * s.width, 1);
    const auto w = random_values(s.weight_size(), 2);
    const auto g = random_values(std::size_t(s.out_channels) * s.out_height() * s.out_width(), 3);
    std::vector<float> din(in.size()), dw(w.size()), db(std::size_t(s.out_channels));
    for (auto _ : st) {
        if constexpr (Fast)
            kernels::fast::conv3x3_backward<float>(s, in, w, g, din, dw, db);
        else
            kernels::ref::conv3x3_backward<float>(s, in, w, g, din, dw, db);
        benchmark::DoNotOptimize(dw.data());
    }
}

template <bool Fast>
void BM_Gemv(benchmark::State& st) {
    const int rows = int(st.range(0)), cols = int(st.range(1));
    const auto w = random_values(std::size_t(rows) * cols, 1);
    const auto x = random_values(std::size_t(cols), 2);
    std::vector<float> y(static_cast<std::size_t>(rows));
    for (auto _ : st) {
        if constexpr (Fast)
            kernels::fast::gemv<float>(w, rows, cols, x, y);
        else
            kernels::ref::gemv<float>(w, rows, cols, x, y);
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Fast>
void BM_GemvT(benchmark::State& st) {
    const int rows = int(st.range(0)), cols = int(st.range(1));
    const auto w = random_values(std::size_t(rows) * cols, 1);
    const auto g = random_values(std::size_t(rows), 2);
    std::vector<float> dx(static_cast<std::size_t>(cols));
    for (auto _ : st) {
        if constexpr (Fast)
            kernels::fast::gemv_t<float>(w, rows, cols, g, dx);
        else
            kernels::ref::gemv_t<float>(w, rows, cols, g, dx);
        benchmark::DoNotOptimize(dx.data());
    }
}

void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({3, 16, 60, 2})->Args({64, 128, 8, 2})->Args({32, 32, 15, 1})->Args({32, 16, 30, 1})->Args({16, 8, 60, 1});
}

BENCHMARK(BM_ConvForward<false>)->Apply(conv_args);
BENCHMARK(BM_ConvForward<true>)->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Apply(conv_args);
BENCHMARK(BM_Gemv<false>)->Args({384, 128})->Args({512, 512});
BENCHMARK(BM_Gemv<true>)->Args({384, 128})->Args({512, 512});
BENCHMARK(BM_GemvT<false>)->Args({384, 128})->Args({512, 512});
BENCHMARK(BM_GemvT<true>)->Args({384, 128})->Args({512, 512});

struct DeskFixture {
    RunConfig cfg = RunConfig::defaults(Profile::Desk);
    Model model{cfg};
    ParameterStore<float> params;
    Sample sample;

    DeskFixture() {
        params = model.declare<float>(kPartEncoder | kPartDecoder | kPartClassifier, 202);
        Model::initialize(params, 1);
        auto table = params.get(kEmbeddingTable);
        Rng rng(5);
        for (auto& v : table) v = static_cast<float>(rng.uniform(-0.1, 0.1));
        const int S = cfg.enc.image_size;
        sample.chw = random_values(std::size_t(3) * S * S, 9);
        sample.grid.rows = cfg.enc.max_sentences;
        sample.grid.cols = cfg.enc.max_words;
        sample.grid.ids.assign(std::size_t(sample.grid.rows) * sample.grid.cols, 201);
        sample.grid.mask.assign(sample.grid.ids.size(), 0);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 12; ++c) {
                sample.grid.ids[std::size_t(r) * sample.grid.cols + c] = (r * 13 + c) % 200;
                sample.grid.mask[std::size_t(r) * sample.grid.cols + c] = 1;
            }
        sample.label = 1;
    }
};

void BM_AutoencoderPass(benchmark::State& st) {
    DeskFixture f;
    auto g = f.params.zeros_like();
    for (auto _ : st) benchmark::DoNotOptimize(f.model.autoencoder_pass<float>(f.params, &g, f.sample));
}

void BM_ClassifierPass(benchmark::State& st) {
    DeskFixture f;
    auto g = f.params.zeros_like();
    for (auto _ : st) benchmark::DoNotOptimize(f.model.classifier_pass<float>(f.params, &g, f.sample, true));
}

void BM_ImageEncoderForward(benchmark::State& st) {
    DeskFixture f;
    const std::vector<float> x = f.sample.chw;
    for (auto _ : st) benchmark::DoNotOptimize(f.model.image_encoder().forward<float>(f.params, x, nullptr));
}

void BM_ImageDecoderForward(benchmark::State& st) {
    DeskFixture f;
    const std::vector<float> z(512, 0.1f);
    for (auto _ : st) benchmark::DoNotOptimize(f.model.image_decoder().forward<float>(f.params, z, nullptr));
}

BENCHMARK(BM_AutoencoderPass)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifierPass)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ImageEncoderForward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ImageDecoderForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
