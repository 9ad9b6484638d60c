// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic values and finite-difference gradients for every objective.
// Derived expectations are computed by independent in-test oracles (direct
// summation loops) rather than trusted constants where possible.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "acn/error.hpp"
#include "acn/losses.hpp"
#include "test_support.hpp"

using namespace acn;
using acn::test::check_gradients;
using acn::test::close;
using acn::test::rand_uniform;
using acn::test::softmax_oracle;

namespace {

Tensor tensor2x1(double a, double b) {
    Tensor t({1, 2, 1, 1});
    t[0] = a;
    t[1] = b;
    return t;
}

// Direct-summation oracle for the symmetric-KL consistency loss.
double consistency_oracle(const Tensor& a, const Tensor& b) {
    const std::int64_t C = a.dim(1), V = a.dim(0) * a.numel_from(2);
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        double pa = a[i], pb = b[i];
        if (pa > 0.0) acc += pa * std::log(std::max(pa, 1e-8) / std::max(pb, 1e-8));
        if (pb > 0.0) acc += pb * std::log(std::max(pb, 1e-8) / std::max(pa, 1e-8));
    }
    return acc / (double(C) * double(V));
}

}  // namespace

TEST_CASE("soften_logits: uniform, temperature limit, logistic value") {
    // All-equal logits -> exactly uniform at any temperature.
    Tensor equal = Tensor::full({1, 4, 2, 2}, 0.7);
    for (double tau : {0.5, 1.0, 10.0}) {
        ad::Var p = soften_logits(ad::constant(equal), tau);
        for (std::int64_t i = 0; i < p.value().numel(); ++i)
            CHECK(close(p.value()[i], 0.25, 1e-12, 1e-12));
    }

    // Large temperature flattens unit-scale logits: max-min < 0.01 at tau=1000.
    Rng rng(2);
    Tensor logits = rand_uniform({1, 4, 3, 3}, rng, -1.0, 1.0);
    Tensor p = soften_logits(ad::constant(logits), 1000.0).value();
    const std::int64_t S = p.numel_from(2);
    for (std::int64_t i = 0; i < S; ++i) {
        double mx = 0, mn = 1;
        for (int c = 0; c < 4; ++c) {
            mx = std::max(mx, p[c * S + i]);
            mn = std::min(mn, p[c * S + i]);
        }
        CHECK(mx - mn < 0.01);
    }

    // Two-class logits (2, 0) at tau=1: the logistic function of 2.
    Tensor two = tensor2x1(2.0, 0.0);
    Tensor q = soften_logits(ad::constant(two), 1.0).value();
    const double sig2 = 1.0 / (1.0 + std::exp(-2.0));
    CHECK(close(q[0], sig2, 1e-6, 1e-9));       // 0.8808
    CHECK(close(q[1], 1.0 - sig2, 1e-6, 1e-9));  // 0.1192
    CHECK(close(q[0], 0.8808, 1e-4, 1e-4));

    CHECK_THROWS_AS(soften_logits(ad::constant(two), 0.0), ConfigError);
    CHECK_THROWS_AS(soften_logits(ad::constant(two), -1.0), ConfigError);
}

TEST_CASE("softmax normalizes every voxel") {
    Rng rng(3);
    Tensor logits = rand_uniform({2, 4, 4, 4}, rng, -3, 3);
    Tensor p = soften_logits(ad::constant(logits), 1.0).value();
    const std::int64_t S = p.numel_from(2);
    for (std::int64_t b = 0; b < 2; ++b)
        for (std::int64_t i = 0; i < S; ++i) {
            double sum = 0;
            for (int c = 0; c < 4; ++c) sum += p[(b * 4 + c) * S + i];
            CHECK(close(sum, 1.0, 1e-6, 1e-6));
        }
}

TEST_CASE("consistency_loss: zero at equality, symmetric, hand value") {
    Rng rng(5);
    Tensor logits = rand_uniform({1, 3, 4, 4}, rng, -2, 2);
    Tensor p = softmax_oracle(logits);
    CHECK(consistency_loss(ad::constant(p), ad::constant(p)).value()[0] == 0.0);

    Tensor q = softmax_oracle(rand_uniform({1, 3, 4, 4}, rng, -2, 2));
    double ab = consistency_loss(ad::constant(p), ad::constant(q)).value()[0];
    double ba = consistency_loss(ad::constant(q), ad::constant(p)).value()[0];
    CHECK(close(ab, ba, 1e-9, 1e-12));
    CHECK(ab > 0.0);
    CHECK(close(ab, consistency_oracle(p, q), 1e-9, 1e-12));

    // Single voxel, C=2: s_m=(0.8,0.2), s_u=(0.5,0.5) -> about 0.2079 nats.
    Tensor sm = tensor2x1(0.8, 0.2);
    Tensor su = tensor2x1(0.5, 0.5);
    double v = consistency_loss(ad::constant(sm), ad::constant(su)).value()[0];
    double oracle = 0.5 * (0.8 * std::log(0.8 / 0.5) + 0.2 * std::log(0.2 / 0.5) +
                           0.5 * std::log(0.5 / 0.8) + 0.5 * std::log(0.5 / 0.2));
    CHECK(close(v, oracle, 1e-9, 1e-12));
    CHECK(close(v, 0.2079, 1e-4, 1e-4));

    CHECK_THROWS_AS(consistency_loss(ad::constant(sm), ad::constant(Tensor({1, 3, 1, 1}))), ConfigError);
}

TEST_CASE("consistency_loss is nonnegative and vanishes only at equality") {
    Rng rng(6);
    for (int rep = 0; rep < 30; ++rep) {
        Tensor a = softmax_oracle(rand_uniform({1, 4, 2, 2}, rng, -3, 3));
        Tensor b = softmax_oracle(rand_uniform({1, 4, 2, 2}, rng, -3, 3));
        double v = consistency_loss(ad::constant(a), ad::constant(b)).value()[0];
        CHECK(v >= 0.0);
        if (v < 1e-12)
            for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(close(a[i], b[i], 1e-5, 1e-7));
    }
}

TEST_CASE("self_information: one-hot, uniform, bounds, entropy identity") {
    // One-hot voxel: all channels zero, scalar zero.
    Tensor onehot({1, 4, 1, 1});
    onehot[2] = 1.0;
    SelfInformation si = self_information(ad::constant(onehot));
    for (int c = 0; c < 4; ++c) CHECK(si.channels.value()[c] == 0.0);
    CHECK(si.scalar.value()[0] == 0.0);

    // Uniform voxel with C=4: scalar ln 4, channels 0.25 ln 4 each.
    Tensor uniform = Tensor::full({1, 4, 1, 1}, 0.25);
    SelfInformation su = self_information(ad::constant(uniform));
    CHECK(close(su.scalar.value()[0], std::log(4.0), 1e-9, 1e-12));  // 1.3863
    for (int c = 0; c < 4; ++c)
        CHECK(close(su.channels.value()[c], 0.25 * std::log(4.0), 1e-9, 1e-12));  // 0.3466

    // Random distributions: channels in [0, 1/e], scalar in [0, log C],
    // scalar equals the Shannon entropy computed independently.
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor p = softmax_oracle(rand_uniform({1, 4, 3, 3}, rng, -4, 4));
        SelfInformation s = self_information(ad::constant(p));
        const std::int64_t S = p.numel_from(2);
        for (std::int64_t i = 0; i < s.channels.value().numel(); ++i) {
            CHECK(s.channels.value()[i] >= 0.0);
            CHECK(s.channels.value()[i] <= std::exp(-1.0) + 1e-9);
        }
        for (std::int64_t i = 0; i < S; ++i) {
            double h = 0;
            for (int c = 0; c < 4; ++c) {
                double v = p[c * S + i];
                if (v > 0) h -= v * std::log(v);
            }
            CHECK(s.scalar.value()[i] >= -1e-12);
            CHECK(s.scalar.value()[i] <= std::log(4.0) + 1e-9);
            CHECK(close(s.scalar.value()[i], h, 1e-9, 1e-12));
        }
    }
}

TEST_CASE("adversarial losses: midpoint, optimum, clamp ceiling, gradient sign") {
    // Logits 0 on both sides: D(x) = 0.5 -> loss 2 ln 2; generator ln 2.
    Tensor zeros({1, 1, 2, 2});
    double d_mid = adversarial_d_loss(ad::constant(zeros), ad::constant(zeros)).value()[0];
    CHECK(close(d_mid, 2.0 * std::log(2.0), 1e-9, 1e-12));  // 1.3863
    double g_mid = adversarial_g_loss(ad::constant(zeros)).value()[0];
    CHECK(close(g_mid, std::log(2.0), 1e-9, 1e-12));  // 0.6931

    // Perfect discriminator: real logits large positive, fake large negative.
    Tensor big_pos = Tensor::full({1, 1, 2, 2}, 50.0);
    Tensor big_neg = Tensor::full({1, 1, 2, 2}, -50.0);
    CHECK(adversarial_d_loss(ad::constant(big_pos), ad::constant(big_neg)).value()[0] < 1e-9);
    CHECK(adversarial_g_loss(ad::constant(big_pos)).value()[0] < 1e-9);

    // Swapped arguments with a perfect discriminator: saturates at the
    // clamp ceiling -log(1e-8) per term.
    double swapped = adversarial_d_loss(ad::constant(big_neg), ad::constant(big_pos)).value()[0];
    CHECK(close(swapped, 2.0 * kMaxNegLog, 1e-12, 1e-12));
    CHECK(close(adversarial_g_loss(ad::constant(big_neg)).value()[0], kMaxNegLog, 1e-12, 1e-12));

    // d loss/d p(fake) < 0 for the generator everywhere in (0,1): the
    // logit-space gradient is -sigmoid(-x) < 0.
    for (double logit : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        ad::Var leaf = ad::parameter(Tensor::full({1, 1, 1, 1}, logit));
        ad::backward(adversarial_g_loss(leaf));
        CHECK(leaf.grad()[0] < 0.0);
    }
}

TEST_CASE("dice_loss: identity, disjoint, half overlap, bounds, permutation invariance") {
    // probs == one-hot target: loss within epsilon slack of zero.
    Tensor t({1, 4, 2, 2});
    for (int i = 0; i < 4; ++i) t[(i % 4) * 4 + i] = 1.0;  // diagonal-ish one-hot
    double same = dice_loss(ad::constant(t), t).value()[0];
    CHECK(same < 1e-4);
    CHECK(same >= 0.0);

    // One-hot prediction disjoint from the target on every voxel.
    Tensor pred({1, 2, 1, 4});
    Tensor targ({1, 2, 1, 4});
    for (int i = 0; i < 4; ++i) {
        pred[i] = 1.0;      // class 0 everywhere
        targ[4 + i] = 1.0;  // class 1 everywhere
    }
    CHECK(close(dice_loss(ad::constant(pred), targ).value()[0], 1.0, 1e-4, 1e-4));

    // Single class, 4 voxels, p=(1,1,0,0), t=(1,0,1,0) -> 1 - 2/4 = 0.5.
    Tensor p1({1, 1, 1, 4});
    p1[0] = 1;
    p1[1] = 1;
    Tensor t1({1, 1, 1, 4});
    t1[0] = 1;
    t1[2] = 1;
    CHECK(close(dice_loss(ad::constant(p1), t1).value()[0], 0.5, 1e-4, 1e-4));

    // Bounds and joint voxel-permutation invariance.
    Rng rng(9);
    Tensor p = softmax_oracle(rand_uniform({1, 4, 2, 4}, rng, -2, 2));
    Tensor y({1, 4, 2, 4});
    for (int i = 0; i < 8; ++i) y[std::int64_t(rng.uniform_int(0, 3)) * 8 + i] = 1.0;
    double v = dice_loss(ad::constant(p), y).value()[0];
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-6);
    // Reverse voxel order jointly in both tensors.
    Tensor pr = p, yr = y;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 8; ++i) {
            pr[c * 8 + i] = p[c * 8 + 7 - i];
            yr[c * 8 + i] = y[c * 8 + 7 - i];
        }
    CHECK(close(dice_loss(ad::constant(pr), yr).value()[0], v, 1e-12, 1e-12));

    CHECK_THROWS_AS(dice_loss(ad::constant(p), Tensor({1, 4, 2, 2})), ConfigError);
}

TEST_CASE("ramp_up: endpoints, midpoint, clamp, rejection") {
    CHECK(close(ramp_up(100, 100), 0.1, 1e-12, 1e-12));               // S = L
    CHECK(close(ramp_up(0, 100), 0.1 * std::exp(-5.0), 1e-9, 1e-12));  // 6.738e-4
    CHECK(close(ramp_up(50, 100), 0.1 * std::exp(-1.25), 1e-9, 1e-12));  // 0.02865
    CHECK(close(ramp_up(0, 100), 6.738e-4, 1e-3, 1e-6));
    CHECK(close(ramp_up(50, 100), 0.02865, 1e-3, 1e-6));
    CHECK(ramp_up(250, 100) == ramp_up(100, 100));  // clamps above L
    CHECK_THROWS_AS(ramp_up(10, 0), ConfigError);
    CHECK_THROWS_AS(ramp_up(10, -5), ConfigError);
    CHECK_THROWS_AS(ramp_up(-1, 10), ConfigError);
}

TEST_CASE("total_loss: zeros, tuned-weight combination, defaults, gating, errors") {
    auto scalar = [](double v) { return ad::constant(Tensor::full({1}, v)); };
    LossWeights w;  // defaults
    w.ramp_length = 100;

    // Default weights are the tuned constants.
    CHECK(w.lambda_multi == 0.2);
    CHECK(w.lambda_uni == 0.8);
    CHECK(w.lambda0 == 0.001);
    CHECK(w.lambda1 == 0.0002);
    CHECK(w.lambda2 == 0.5);
    CHECK(w.ramp_amplitude == 0.1);

    LossParts zeros{scalar(0), scalar(0), scalar(0), scalar(0), scalar(0), scalar(0)};
    CHECK(total_loss(zeros, w, 100).total.value()[0] == 0.0);

    LossParts ones{scalar(1), scalar(1), scalar(1), scalar(1), scalar(1), scalar(1)};
    TotalLoss tl = total_loss(ones, w, 100);  // S = L -> omega = 0.1
    CHECK(close(tl.total.value()[0], 1.6012, 1e-9, 1e-9));
    CHECK(close(tl.breakdown.omega, 0.1, 1e-12, 1e-12));
    CHECK(tl.breakdown.w_dice_multi == 0.2);
    CHECK(tl.breakdown.w_mi == 0.5);

    // Linearity in each part: perturbing one part by delta moves the total
    // by exactly coeff * delta.
    struct Probe {
        int index;
        double coeff;
    };
    const Probe probes[] = {{0, 0.2}, {1, 0.8}, {2, 0.1}, {3, 0.001}, {4, 0.0002}, {5, 0.5}};
    for (const auto& pr : probes) {
        LossParts parts = ones;
        ad::Var bumped = scalar(1.0 + 0.5);
        switch (pr.index) {
            case 0: parts.dice_multi = bumped; break;
            case 1: parts.dice_uni = bumped; break;
            case 2: parts.consistency = bumped; break;
            case 3: parts.en_adv_gen = bumped; break;
            case 4: parts.kn_adv_gen = bumped; break;
            case 5: parts.mi = bumped; break;
        }
        double moved = total_loss(parts, w, 100).total.value()[0];
        CHECK(close(moved - tl.total.value()[0], 0.5 * pr.coeff, 1e-9, 1e-12));
    }

    // A non-finite part is rejected by name.
    LossParts bad = ones;
    bad.kn_adv_gen = scalar(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_WITH_AS(total_loss(bad, w, 100), doctest::Contains("kn_adv_gen"), NumericError);
}

TEST_CASE("gradients: consistency through softmax") {
    Rng rng(41);
    for (int rep = 0; rep < 3; ++rep) {
        std::vector<Tensor> inputs = {rand_uniform({1, 3, 3, 3}, rng, -2, 2),
                                      rand_uniform({1, 3, 3, 3}, rng, -2, 2)};
        CHECK(check_gradients(inputs, [](const std::vector<ad::Var>& v) {
                  return consistency_loss(ad::softmax_channels(v[0], 1.0),
                                          ad::softmax_channels(v[1], 1.0));
              }) == 0);
    }
}

TEST_CASE("gradients: self-information through softmax") {
    Rng rng(42);
    for (int rep = 0; rep < 3; ++rep) {
        std::vector<Tensor> inputs = {rand_uniform({1, 4, 3, 3}, rng, -2, 2)};
        CHECK(check_gradients(inputs, [](const std::vector<ad::Var>& v) {
                  return ad::sum(self_information(ad::softmax_channels(v[0], 1.0)).channels);
              }) == 0);
    }
}

TEST_CASE("gradients: adversarial and dice") {
    Rng rng(43);
    CHECK(check_gradients({rand_uniform({1, 1, 3, 3}, rng, -2, 2), rand_uniform({1, 1, 3, 3}, rng, -2, 2)},
                          [](const std::vector<ad::Var>& v) {
                              return adversarial_d_loss(v[0], v[1]);
                          }) == 0);
    CHECK(check_gradients({rand_uniform({1, 1, 3, 3}, rng, -2, 2)},
                          [](const std::vector<ad::Var>& v) { return adversarial_g_loss(v[0]); }) == 0);

    Tensor y({1, 3, 2, 2});
    for (int i = 0; i < 4; ++i) y[std::int64_t(rng.uniform_int(0, 2)) * 4 + i] = 1.0;
    CHECK(check_gradients({rand_uniform({1, 3, 2, 2}, rng, -2, 2)}, [&](const std::vector<ad::Var>& v) {
              return dice_loss(ad::softmax_channels(v[0], 1.0), y);
          }) == 0);
}
