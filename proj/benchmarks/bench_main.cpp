#include <benchmark/benchmark.h>

#include <cmath>

#include "debias/evaluation.hpp"
#include "debias/imageops.hpp"
#include "debias/rng.hpp"
#include "debias/tape.hpp"
#include "debias/tensor.hpp"
#include "debias/tsne.hpp"

namespace {

debias::Tensor random_tensor(debias::Rng& rng, std::vector<int> shape) {
    debias::Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-0.5, 0.5));
    return t;
}

void BM_conv2d_forward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    debias::Rng rng(1);
    debias::Tensor x = random_tensor(rng, {n, 3, 32, 32});
    debias::Tensor w = random_tensor(rng, {16, 3, 3, 3});
    debias::Tensor b = random_tensor(rng, {16});
    for (auto _ : state) {
        debias::Tape t;
        auto y = t.conv2d(t.constant(x), t.constant(w), t.constant(b), 2, 1);
        benchmark::DoNotOptimize(t.value(y).data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t{n} * 16 * 16 * 16 * 3 * 9);
}
BENCHMARK(BM_conv2d_forward)->Arg(8)->Arg(32);

void BM_conv2d_train_step(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    debias::Rng rng(2);
    debias::Tensor x = random_tensor(rng, {n, 3, 32, 32});
    debias::Tensor w = random_tensor(rng, {16, 3, 3, 3});
    debias::Tensor b = random_tensor(rng, {16});
    debias::Tensor target({n, 16, 16, 16});
    for (auto _ : state) {
        debias::Tape t;
        auto wid = t.leaf(w, true);
        auto bid = t.leaf(b, true);
        auto y = t.conv2d(t.constant(x), wid, bid, 2, 1);
        auto loss = t.mse_loss(y, t.constant(target));
        t.backward(loss);
        benchmark::DoNotOptimize(t.grad(wid).data());
    }
}
BENCHMARK(BM_conv2d_train_step)->Arg(8)->Arg(32);

void BM_dense_forward(benchmark::State& state) {
    debias::Rng rng(3);
    debias::Tensor x = random_tensor(rng, {64, 1024});
    debias::Tensor w = random_tensor(rng, {64, 1024});
    debias::Tensor b = random_tensor(rng, {64});
    for (auto _ : state) {
        debias::Tape t;
        auto y = t.dense(t.constant(x), t.constant(w), t.constant(b));
        benchmark::DoNotOptimize(t.value(y).data());
    }
}
BENCHMARK(BM_dense_forward);

void BM_knn_loo(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    debias::Rng rng(4);
    debias::FeatureMatrix f;
    f.rows = random_tensor(rng, {n, 64});
    f.row_ids.resize(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        f.row_ids[static_cast<size_t>(i)] = i;
        labels[static_cast<size_t>(i)] = static_cast<int>(rng.below(4));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(debias::knn_loo_accuracy(f, labels, 3));
    }
    state.SetItemsProcessed(state.iterations() * int64_t{n} * n);
}
BENCHMARK(BM_knn_loo)->Arg(120)->Arg(480);

void BM_tsne_iteration(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    debias::Rng rng(5);
    debias::FeatureMatrix f;
    f.rows = random_tensor(rng, {n, 64});
    f.row_ids.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) f.row_ids[static_cast<size_t>(i)] = i;
    for (auto _ : state) {
        // 50 gradient iterations on calibrated affinities; cost per iter is
        // what the arg sweep exposes (quadratic in n)
        benchmark::DoNotOptimize(debias::tsne_embed(f, 10.0, 50, 1).points.data());
    }
    state.SetItemsProcessed(state.iterations() * 50 * int64_t{n} * n);
}
BENCHMARK(BM_tsne_iteration)->Arg(120)->Arg(240)->Unit(benchmark::kMillisecond);

void BM_dog_detect(benchmark::State& state) {
    const int hw = static_cast<int>(state.range(0));
    debias::Tensor img({1, hw, hw});
    const double sigma = 2.0;
    for (int r = 0; r < hw; ++r)
        for (int c = 0; c < hw; ++c) {
            double v = 0.0;
            for (int b = 1; b <= 4; ++b) { // four blobs along the diagonal
                const double dr = r - b * hw / 5.0, dc = c - b * hw / 5.0;
                v += std::exp(-0.5 * (dr * dr + dc * dc) / (sigma * sigma));
            }
            img.at3(0, r, c) = static_cast<float>(v);
        }
    for (auto _ : state) {
        benchmark::DoNotOptimize(debias::dog_detect(img, sigma / std::sqrt(2.0),
                                                    sigma * std::sqrt(2.0), 1e-4));
    }
    state.SetItemsProcessed(state.iterations() * int64_t{hw} * hw);
}
BENCHMARK(BM_dog_detect)->Arg(64)->Arg(128);

} // namespace

BENCHMARK_MAIN();
