// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "acn/backbone.hpp"
#include "acn/error.hpp"
#include "test_support.hpp"

using namespace acn;
using acn::test::close;
using acn::test::rand_uniform;

namespace {
BackboneConfig desk_cfg(int in_channels = 4) {
    BackboneConfig cfg;
    cfg.in_channels = in_channels;
    cfg.num_classes = 4;
    cfg.levels = 4;
    cfg.base_width = 8;
    cfg.spatial_rank = 2;
    return cfg;
}
}  // namespace

TEST_CASE("shape contract: 1x4x64x64 -> logits 1x4x64x64, encoder sizes 64/32/16/8") {
    Backbone net(desk_cfg(), 1);
    Rng rng(1);
    Tensor x = rand_uniform({1, 4, 64, 64}, rng, -1, 1);
    BackboneOutput out = net.forward(x);
    CHECK(out.logits.value().shape() == std::vector<std::int64_t>({1, 4, 64, 64}));
    REQUIRE(out.encoder_features.size() == 4);
    const std::int64_t sizes[4] = {64, 32, 16, 8};
    const std::int64_t widths[4] = {8, 16, 32, 64};
    for (int k = 0; k < 4; ++k) {
        const auto& f = out.encoder_features[std::size_t(k)].value();
        CHECK(f.dim(1) == widths[k]);
        CHECK(f.dim(2) == sizes[k]);
        CHECK(f.dim(3) == sizes[k]);
    }
    CHECK(out.bottleneck.value().same_shape(out.encoder_features[3].value()));
}

TEST_CASE("determinism: same seed gives identical parameters, different seed differs") {
    Backbone a(desk_cfg(), 77), b(desk_cfg(), 77), c(desk_cfg(), 78);
    CHECK(a.checksum() == b.checksum());
    CHECK(a.checksum() != c.checksum());
}

TEST_CASE("zero input with the zero-initialized projection: logits 0, softmax uniform") {
    Backbone net(desk_cfg(), 5);
    Tensor x({1, 4, 32, 32});
    BackboneOutput out = net.forward(x);
    for (std::int64_t i = 0; i < out.logits.value().numel(); ++i) CHECK(out.logits.value()[i] == 0.0);
    Tensor p = ad::softmax_channels(out.logits, 1.0).value();
    for (std::int64_t i = 0; i < p.numel(); ++i) CHECK(close(p[i], 0.25, 1e-12, 1e-12));
}

TEST_CASE("softmax of any forward sums to one per voxel") {
    Backbone net(desk_cfg(2), 9);
    // Give the projection nonzero weights so logits are nontrivial.
    Rng prng(3);
    for (auto& pvar : net.parameters()) {
        Tensor& t = pvar.node()->value;
        for (std::int64_t i = 0; i < t.numel(); ++i)
            if (t[i] == 0.0) t[i] = prng.normal(0.0, 0.1);
    }
    Rng rng(4);
    Tensor x = rand_uniform({2, 2, 32, 32}, rng, -2, 2);
    Tensor p = ad::softmax_channels(net.forward(x).logits, 1.0).value();
    const std::int64_t S = p.numel_from(2);
    for (std::int64_t b = 0; b < 2; ++b)
        for (std::int64_t i = 0; i < S; ++i) {
            double sum = 0;
            for (int c = 0; c < 4; ++c) sum += p[(b * 4 + c) * S + i];
            CHECK(close(sum, 1.0, 1e-6, 1e-6));
        }
}

TEST_CASE("batch independence: stacked samples equal their solo runs") {
    Backbone net(desk_cfg(), 21);
    Rng prng(5);
    for (auto& pvar : net.parameters()) {
        Tensor& t = pvar.node()->value;
        for (std::int64_t i = 0; i < t.numel(); ++i)
            if (t[i] == 0.0) t[i] = prng.normal(0.0, 0.05);
    }
    Rng rng(6);
    Tensor batch = rand_uniform({2, 4, 32, 32}, rng, -1, 1);
    Tensor by = net.forward(batch).logits.value();
    const std::int64_t per_in = batch.numel_from(1), per_out = by.numel_from(1);
    for (int b = 0; b < 2; ++b) {
        Tensor solo({1, 4, 32, 32});
        std::copy_n(batch.data() + b * per_in, per_in, solo.data());
        Tensor sy = net.forward(solo).logits.value();
        for (std::int64_t i = 0; i < per_out; ++i)
            CHECK(close(sy[i], by[b * per_out + i], 1e-6, 1e-9));
    }
}

TEST_CASE("the two paths share hyperparameters but never parameters") {
    Backbone multi(desk_cfg(4), 31);
    BackboneConfig uni_cfg = desk_cfg(1);
    Backbone uni(uni_cfg, 32);
    std::uint64_t uni_before = uni.checksum();
    // Perturb every multi parameter; the uni path must not move.
    for (auto& pvar : multi.parameters()) pvar.node()->value[0] += 0.5;
    CHECK(uni.checksum() == uni_before);
}

TEST_CASE("forward is deterministic in inference mode") {
    Backbone net(desk_cfg(), 41);
    Rng rng(7);
    Tensor x = rand_uniform({1, 4, 32, 32}, rng, -1, 1);
    ad::NoGradGuard ng;
    Tensor y1 = net.forward(x).logits.value();
    Tensor y2 = net.forward(x).logits.value();
    CHECK(y1.storage() == y2.storage());
}

TEST_CASE("input validation: channel count, divisibility, rank") {
    Backbone net(desk_cfg(), 51);
    CHECK_THROWS_AS(net.forward(Tensor({1, 3, 32, 32})), ConfigError);  // wrong channels
    CHECK_THROWS_WITH_AS(net.forward(Tensor({1, 4, 36, 36})), doctest::Contains("divisible"),
                         ConfigError);  // 36 % 8 != 0
    CHECK_THROWS_AS(net.forward(Tensor({1, 4, 32, 32, 32})), ConfigError);  // rank mismatch

    BackboneConfig bad = desk_cfg();
    bad.levels = 1;
    CHECK_THROWS_AS(Backbone(bad, 1), ConfigError);
    bad = desk_cfg();
    bad.base_width = 2;
    CHECK_THROWS_AS(Backbone(bad, 1), ConfigError);
    bad = desk_cfg();
    bad.num_classes = 1;
    CHECK_THROWS_AS(Backbone(bad, 1), ConfigError);
}

TEST_CASE("3d backbone builds and honors the shape contract") {
    BackboneConfig cfg = desk_cfg();
    cfg.spatial_rank = 3;
    cfg.levels = 3;
    Backbone net(cfg, 61);
    Rng rng(8);
    Tensor x = rand_uniform({1, 4, 16, 16, 16}, rng, -1, 1);
    BackboneOutput out = net.forward(x);
    CHECK(out.logits.value().shape() == std::vector<std::int64_t>({1, 4, 16, 16, 16}));
    REQUIRE(out.encoder_features.size() == 3);
    CHECK(out.encoder_features[2].value().dim(2) == 4);
}

TEST_CASE("gradients flow to every parameter once the projection is nonzero") {
    BackboneConfig cfg = desk_cfg(2);
    cfg.levels = 2;
    cfg.base_width = 4;
    Backbone net(cfg, 71);
    Rng rng(9);
    Tensor x = rand_uniform({1, 2, 8, 8}, rng, -1, 1);

    auto grad_count = [&net, &x]() {
        BackboneOutput out = net.forward(ad::constant(x));
        ad::zero_grad(net.parameters());
        ad::backward(ad::sum(ad::leaky_relu(out.logits, 0.3)));
        int with_grad = 0;
        for (const auto& p : net.parameters()) {
            ad::ensure_grad(*p.node());
            double norm = 0;
            for (std::int64_t i = 0; i < p.grad().numel(); ++i) norm += std::abs(p.grad()[i]);
            with_grad += norm > 0 ? 1 : 0;
        }
        return with_grad;
    };

    // At zero-init the projection gates the body: only its own two
    // parameters receive gradient from the logits.
    CHECK(grad_count() == 2);

    // After the projection moves off zero (as its first optimizer step
    // does), every parameter is reached.
    Rng prng(10);
    Tensor& w = net.parameters()[net.parameters().size() - 2].node()->value;
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = prng.normal(0.0, 0.1);
    CHECK(grad_count() == int(net.parameters().size()));
}
