// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hot-path timings: convolution forward/backward, whole-path forward, one
// co-training step and the evaluation metrics.

#include <benchmark/benchmark.h>

#include "acn/ad.hpp"
#include "acn/backbone.hpp"
#include "acn/metrics.hpp"
#include "acn/random.hpp"
#include "acn/synth.hpp"
#include "acn/trainer.hpp"

namespace {

using namespace acn;

Tensor rand_tensor(std::vector<std::int64_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(1);
    Tensor x = rand_tensor({1, 8, 64, 64}, rng);
    Tensor w = rand_tensor({8, 8, 3, 3}, rng);
    Tensor b = rand_tensor({8}, rng);
    ad::NoGradGuard ng;
    for (auto _ : state) {
        ad::Var y = ad::conv(ad::constant(x), ad::constant(w), ad::constant(b), 1, 1);
        benchmark::DoNotOptimize(y.value().data());
    }
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dForwardBackward(benchmark::State& state) {
    Rng rng(2);
    Tensor x = rand_tensor({1, 8, 64, 64}, rng);
    Tensor w = rand_tensor({8, 8, 3, 3}, rng);
    Tensor b = rand_tensor({8}, rng);
    for (auto _ : state) {
        ad::Var xv = ad::parameter(x);
        ad::Var wv = ad::parameter(w);
        ad::Var bv = ad::parameter(b);
        ad::Var loss = ad::sum(ad::conv(xv, wv, bv, 1, 1));
        ad::backward(loss);
        benchmark::DoNotOptimize(wv.grad().data());
    }
}
BENCHMARK(BM_Conv2dForwardBackward);

void BM_BackboneForward64(benchmark::State& state) {
    BackboneConfig cfg;
    cfg.in_channels = 4;
    Backbone net(cfg, 7);
    Rng rng(3);
    Tensor x = rand_tensor({1, 4, 64, 64}, rng);
    ad::NoGradGuard ng;
    for (auto _ : state) {
        BackboneOutput out = net.forward(x);
        benchmark::DoNotOptimize(out.logits.value().data());
    }
}
BENCHMARK(BM_BackboneForward64);

void BM_TrainStep32(benchmark::State& state) {
    SynthConfig synth;
    synth.spatial_shape = {32, 32};
    synth.et_radius = {1.5, 2.5};
    synth.tc_radius = {3.5, 4.5};
    synth.wt_radius = {5.5, 7.5};
    synth.seed = 5;
    SynthCase sc = synth_generate(synth);
    std::vector<Case> cases = {{"bench", std::move(sc.volume), std::move(sc.labels)}};
    TrainConfig cfg;
    cfg.mask = ModalityMask::parse("t1c");
    cfg.patch_size = {32, 32};
    cfg.base_lr = 1e-3;
    Trainer trainer(cfg);
    auto normalized = Trainer::normalize_cases(cases);
    for (auto _ : state) {
        Batch batch = trainer.sample_batch(normalized);
        StepResult res = trainer.train_step(batch);
        benchmark::DoNotOptimize(res.gen.total);
    }
}
BENCHMARK(BM_TrainStep32);

void BM_Hd95_16cubed(benchmark::State& state) {
    Rng rng(9);
    BinaryMask a = BinaryMask::zeros({16, 16, 16});
    BinaryMask b = BinaryMask::zeros({16, 16, 16});
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        a.voxels[std::size_t(i)] = rng.uniform() < 0.2;
        b.voxels[std::size_t(i)] = rng.uniform() < 0.2;
    }
    for (auto _ : state) {
        Hd95Result r = hd95(a, b);
        benchmark::DoNotOptimize(r.mm);
    }
}
BENCHMARK(BM_Hd95_16cubed);

void BM_SynthGenerate64(benchmark::State& state) {
    SynthConfig cfg;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.seed = ++seed;
        SynthCase sc = synth_generate(cfg);
        benchmark::DoNotOptimize(sc.volume.channels.data());
    }
}
BENCHMARK(BM_SynthGenerate64);

}  // namespace

BENCHMARK_MAIN();
