// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Co-training loop mechanics: the poly schedule, term gating, phase
// isolation, seeded determinism, bitwise save/load resumption, evaluation
// and checkpoint error paths.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "acn/error.hpp"
#include "acn/trainer.hpp"
#include "test_support.hpp"

using namespace acn;
using acn::test::close;

namespace {

TrainConfig desk_cfg() {
    TrainConfig cfg;
    cfg.mask = ModalityMask::parse("t1c");
    cfg.patch_size = {32, 32};
    cfg.epochs = 2;
    cfg.steps_per_epoch = 3;
    cfg.base_lr = 1e-3;
    cfg.seed = 5;
    cfg.weights.ramp_length = 10;
    return cfg;
}

SynthConfig synth_cfg(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.spatial_shape = {32, 32};
    cfg.et_radius = {1.5, 2.5};
    cfg.tc_radius = {3.5, 4.5};
    cfg.wt_radius = {5.5, 7.5};
    cfg.noise_std = 0.05;
    cfg.seed = seed;
    return cfg;
}

std::vector<Case> make_cases(int n, std::uint64_t seed0) {
    std::vector<Case> cases;
    for (int i = 0; i < n; ++i) {
        SynthCase sc = synth_generate(synth_cfg(seed0 + std::uint64_t(i)));
        cases.push_back({"case_" + std::to_string(i), std::move(sc.volume), std::move(sc.labels)});
    }
    return cases;
}

}  // namespace

TEST_CASE("poly_lr: endpoints and midpoint") {
    TrainConfig cfg = desk_cfg();
    cfg.epochs = 300;
    cfg.base_lr = 1e-4;
    CHECK(poly_lr(0, cfg) == 1e-4);
    CHECK(poly_lr(300, cfg) == 0.0);
    CHECK(close(poly_lr(150, cfg), 1e-4 * std::pow(0.5, 0.9), 1e-9, 1e-15));
    CHECK(close(poly_lr(150, cfg), 5.359e-5, 1e-3, 1e-9));
    CHECK_THROWS_AS(poly_lr(-1, cfg), ConfigError);
    CHECK_THROWS_AS(poly_lr(301, cfg), ConfigError);

    // Monotonically non-increasing across the whole range.
    double prev = poly_lr(0, cfg);
    for (int e = 1; e <= 300; ++e) {
        double lr = poly_lr(e, cfg);
        CHECK(lr <= prev + 1e-18);
        prev = lr;
    }
}

TEST_CASE("config round-trips through kv and hashes stably") {
    TrainConfig cfg = desk_cfg();
    cfg.use_kna = false;
    TrainConfig back = TrainConfig::from_kv(cfg.to_kv());
    CHECK(back.config_hash() == cfg.config_hash());
    CHECK(back.mask.token() == "t1c");
    CHECK_FALSE(back.use_kna);
    CHECK(back.patch_size == cfg.patch_size);

    TrainConfig other = cfg;
    other.base_lr = 2e-3;
    CHECK(other.config_hash() != cfg.config_hash());
}

TEST_CASE("hyperparameter defaults snapshot") {
    TrainConfig cfg;
    CHECK(cfg.weights.lambda_multi == 0.2);
    CHECK(cfg.weights.lambda_uni == 0.8);
    CHECK(cfg.weights.lambda0 == 0.001);
    CHECK(cfg.weights.lambda1 == 0.0002);
    CHECK(cfg.weights.lambda2 == 0.5);
    CHECK(cfg.weights.ramp_amplitude == 0.1);
    CHECK(cfg.base_lr == 1e-4);
    CHECK(cfg.poly_power == 0.9);
    CHECK(cfg.epochs == 300);
    CHECK(cfg.batch_size == 1);
    CHECK(cfg.tau == 1.0);
    // Auto ramp length resolves to 40% of the step budget.
    CHECK(cfg.effective_ramp_length() == std::int64_t(0.4 * 300 * 50));
}

TEST_CASE("term gating: ablation flags remove exactly their weighted terms") {
    auto cases = make_cases(1, 100);

    TrainConfig cfg = desk_cfg();
    cfg.use_ena = cfg.use_kna = cfg.use_mmi = false;
    Trainer t(cfg);
    auto normalized = Trainer::normalize_cases(cases);
    Batch batch = t.sample_batch(normalized);
    StepResult res = t.step_generators(batch);

    CHECK(res.gen.en_adv_gen == 0.0);
    CHECK(res.gen.kn_adv_gen == 0.0);
    CHECK(res.gen.mi == 0.0);
    // Total is exactly the three remaining weighted terms.
    double expect = res.gen.w_dice_multi + res.gen.w_dice_uni + res.gen.w_consistency;
    CHECK(res.gen.total == expect);
    CHECK(close(res.gen.w_consistency, res.gen.omega * res.gen.consistency, 1e-15, 1e-15));

    // Ablated discriminator phase is a no-op.
    auto [den, dkn] = t.step_discriminators(batch);
    CHECK(den == 0.0);
    CHECK(dkn == 0.0);

    // Full config carries all six terms.
    TrainConfig full_cfg = desk_cfg();
    Trainer tf(full_cfg);
    StepResult full_res = tf.step_generators(tf.sample_batch(normalized));
    double full_expect = full_res.gen.w_dice_multi + full_res.gen.w_dice_uni +
                         full_res.gen.w_consistency + full_res.gen.w_en_adv_gen +
                         full_res.gen.w_kn_adv_gen + full_res.gen.w_mi;
    CHECK(close(full_res.gen.total, full_expect, 1e-12, 1e-12));
}

TEST_CASE("phase isolation: generator and discriminator parameters never cross") {
    auto cases = Trainer::normalize_cases(make_cases(2, 200));
    Trainer t(desk_cfg());

    for (int step = 0; step < 5; ++step) {
        Batch batch = t.sample_batch(cases);
        const std::uint64_t den0 = t.checksum_d_en(), dkn0 = t.checksum_d_kn();
        t.step_generators(batch);
        CHECK(t.checksum_d_en() == den0);  // phase A froze the adversaries
        CHECK(t.checksum_d_kn() == dkn0);

        const std::uint64_t m0 = t.checksum_multi(), u0 = t.checksum_uni(), h0 = t.checksum_mmi();
        t.step_discriminators(batch);
        CHECK(t.checksum_multi() == m0);  // phase B left the paths alone
        CHECK(t.checksum_uni() == u0);
        CHECK(t.checksum_mmi() == h0);
        CHECK(t.checksum_d_en() != den0);  // and did move the adversaries
        CHECK(t.checksum_d_kn() != dkn0);
    }
}

TEST_CASE("determinism: two trainers with one seed produce bitwise-equal 10-step traces") {
    auto cases = Trainer::normalize_cases(make_cases(2, 300));
    TrainConfig cfg = desk_cfg();
    Trainer a(cfg), b(cfg);
    for (int step = 0; step < 10; ++step) {
        StepResult ra = a.train_step(a.sample_batch(cases));
        StepResult rb = b.train_step(b.sample_batch(cases));
        CHECK(ra.gen.total == rb.gen.total);
        CHECK(ra.d_en_loss == rb.d_en_loss);
        CHECK(ra.d_kn_loss == rb.d_kn_loss);
    }
    CHECK(a.checksum_multi() == b.checksum_multi());
    CHECK(a.checksum_uni() == b.checksum_uni());

    TrainConfig other = cfg;
    other.seed = cfg.seed + 1;
    Trainer c(other);
    StepResult rc = c.train_step(c.sample_batch(cases));
    Trainer a2(cfg);
    StepResult ra2 = a2.train_step(a2.sample_batch(cases));
    CHECK(rc.gen.total != ra2.gen.total);
}

TEST_CASE("save/load resumes bitwise") {
    test::TempDir tmp("ckpt");
    auto cases = Trainer::normalize_cases(make_cases(2, 400));
    TrainConfig cfg = desk_cfg();

    Trainer a(cfg);
    for (int step = 0; step < 4; ++step) a.train_step(a.sample_batch(cases));
    a.save(tmp.path() + "/mid");

    // Continue the original.
    StepResult next_a = a.train_step(a.sample_batch(cases));

    // Reload and continue the copy.
    Trainer b = Trainer::load(tmp.path() + "/mid");
    CHECK(b.step_count() == a.step_count() - 1);
    StepResult next_b = b.train_step(b.sample_batch(cases));

    CHECK(next_a.gen.total == next_b.gen.total);
    CHECK(next_a.gen.dice_multi == next_b.gen.dice_multi);
    CHECK(next_a.d_en_loss == next_b.d_en_loss);
    CHECK(next_a.d_kn_loss == next_b.d_kn_loss);
    CHECK(a.checksum_multi() == b.checksum_multi());
    CHECK(a.checksum_uni() == b.checksum_uni());
    CHECK(a.checksum_d_en() == b.checksum_d_en());
    CHECK(a.checksum_d_kn() == b.checksum_d_kn());
    CHECK(a.checksum_mmi() == b.checksum_mmi());
}

TEST_CASE("checkpoint errors: edited config, missing component, truncated blob") {
    test::TempDir tmp("ckpterr");
    auto cases = Trainer::normalize_cases(make_cases(1, 500));
    Trainer t(desk_cfg());
    t.train_step(t.sample_batch(cases));
    t.save(tmp.path() + "/c");

    // Edit the stored config: the recorded hash no longer matches.
    {
        std::ofstream out(tmp.path() + "/c/config.kv", std::ios::app);
        out << "train.extra_key = 1\n";
    }
    CHECK_THROWS_WITH_AS(Trainer::load(tmp.path() + "/c"), doctest::Contains("hash"), DataError);

    // Restore, then delete one component.
    t.save(tmp.path() + "/c2");
    std::filesystem::remove(tmp.path() + "/c2/d_kn.bin");
    CHECK_THROWS_WITH_AS(Trainer::load(tmp.path() + "/c2"), doctest::Contains("d_kn"), DataError);

    // Truncate a blob: the component is named.
    t.save(tmp.path() + "/c3");
    std::filesystem::resize_file(tmp.path() + "/c3/uni.bin", 64);
    CHECK_THROWS_WITH_AS(Trainer::load(tmp.path() + "/c3"), doctest::Contains("uni"), DataError);

    // Wrong expected hash is refused.
    t.save(tmp.path() + "/c4");
    CHECK_THROWS_AS(Trainer::load(tmp.path() + "/c4", "0000000000000000"), DataError);
    CHECK_NOTHROW(Trainer::load(tmp.path() + "/c4", t.config().config_hash()));
}

TEST_CASE("fit: smoke run writes a loadable checkpoint and the metric table") {
    test::TempDir tmp("fit");
    auto cases = make_cases(3, 600);
    TrainConfig cfg = desk_cfg();
    cfg.epochs = 1;
    cfg.steps_per_epoch = 1;

    Trainer t(cfg);
    std::vector<Case> train(cases.begin(), cases.begin() + 2);
    std::vector<Case> val(cases.begin() + 2, cases.end());
    t.fit(train, val, tmp.path() + "/run");

    CHECK(std::filesystem::exists(tmp.path() + "/run/last/manifest.kv"));
    CHECK(std::filesystem::exists(tmp.path() + "/run/best/manifest.kv"));
    CHECK(std::filesystem::exists(tmp.path() + "/run/metrics.csv"));
    Trainer loaded = Trainer::load(tmp.path() + "/run/last");
    CHECK(loaded.step_count() == 1);
    CHECK(loaded.epoch() == 1);

    // History length equals the number of eval events (one per epoch here).
    CHECK(t.metric_history().size() == 1);

    // The CSV has one header plus 3 subregion rows per eval event.
    std::ifstream csv(tmp.path() + "/run/metrics.csv");
    int lines = 0;
    std::string line;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 1 + 3);
}

TEST_CASE("fit honors eval_interval") {
    test::TempDir tmp("fit2");
    auto cases = make_cases(2, 700);
    TrainConfig cfg = desk_cfg();
    cfg.epochs = 4;
    cfg.steps_per_epoch = 1;
    cfg.eval_interval = 2;
    Trainer t(cfg);
    t.fit({cases[0]}, {cases[1]}, tmp.path() + "/run");
    CHECK(t.metric_history().size() == 2);  // epochs 2 and 4
}

TEST_CASE("evaluate: ground truth as prediction scores perfectly; counts are complete") {
    auto cases = make_cases(2, 800);

    // Metric-level identity: GT masks against themselves.
    for (const auto& c : cases) {
        SubregionMasks gm = map_nested_subregions(c.labels);
        CHECK(dsc(gm.wt, gm.wt) == 1.0);
        CHECK(hd95(gm.et, gm.et).mm == 0.0);
    }

    // Empty prediction against nonempty truth: DSC 0, sentinel HD95.
    SubregionMasks gm = map_nested_subregions(cases[0].labels);
    BinaryMask empty = BinaryMask::zeros(gm.et.shape, gm.et.spacing);
    REQUIRE(gm.et.count() > 0);
    CHECK(dsc(empty, gm.et) == 0.0);
    Hd95Result h = hd95(empty, gm.et);
    CHECK(h.sentinel);

    // Untrained trainer still yields a complete per-case metric grid:
    // case count x 3 subregions x 2 metrics.
    Trainer t(desk_cfg());
    EvalResult res = t.evaluate(cases);
    REQUIRE(res.cases.size() == 2);
    for (const auto& cr : res.cases) {
        for (int r = 0; r < 3; ++r) {
            CHECK(std::isfinite(cr.dsc[std::size_t(r)]));
            CHECK(std::isfinite(cr.hd95[std::size_t(r)]));
        }
    }
    CHECK(res.mean_dsc_overall == doctest::Approx((res.mean_dsc[0] + res.mean_dsc[1] + res.mean_dsc[2]) / 3.0));
}

TEST_CASE("evaluate rejects a mask/channel mismatch") {
    auto cases = make_cases(1, 900);
    Trainer t(desk_cfg());
    MultimodalVolume vol = zscore_normalize(cases[0].volume);
    Tensor wrong = apply_modality_mask(vol, ModalityMask::parse("fl,t2"));  // 2 channels, path wants 1
    CHECK_THROWS_AS(t.predict_probs(wrong, true), ConfigError);
}

TEST_CASE("non-finite losses abort with the offending term named") {
    auto cases = Trainer::normalize_cases(make_cases(1, 1000));
    Trainer t(desk_cfg());
    Batch batch = t.sample_batch(cases);
    // Poison the multimodal path so its dice goes NaN.
    t.multi_path().parameters()[0].node()->value[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.step_generators(batch), NumericError);
}

TEST_CASE("sample_batch rejects undersized cases and wrong-rank configs") {
    TrainConfig cfg = desk_cfg();
    cfg.patch_size = {64, 64};
    Trainer t(cfg);
    auto small = Trainer::normalize_cases(make_cases(1, 1100));  // 32x32 phantoms
    CHECK_THROWS_AS(t.sample_batch(small), DataError);
}

TEST_CASE("3d training smoke: one step on 16^3 phantoms") {
    SynthConfig sc;
    sc.spatial_shape = {16, 16, 16};
    sc.et_radius = {1.0, 1.5};
    sc.tc_radius = {2.5, 3.0};
    sc.wt_radius = {4.0, 5.0};
    sc.seed = 77;
    SynthCase synth = synth_generate(sc);
    std::vector<Case> cases = {{"vol", std::move(synth.volume), std::move(synth.labels)}};

    TrainConfig cfg;
    cfg.mask = ModalityMask::parse("fl,t2");
    cfg.spatial_rank = 3;
    cfg.patch_size = {16, 16, 16};
    cfg.levels = 3;
    cfg.base_width = 4;
    cfg.base_lr = 1e-3;
    cfg.d_en_widths = {4, 8, 8, 8};
    cfg.d_kn_widths = {8, 8};
    Trainer t(cfg);
    auto normalized = Trainer::normalize_cases(cases);
    Batch batch = t.sample_batch(normalized);
    CHECK(batch.x_multi.shape() == std::vector<std::int64_t>({1, 4, 16, 16, 16}));
    CHECK(batch.x_uni.dim(1) == 2);
    StepResult res = t.train_step(batch);
    CHECK(std::isfinite(res.gen.total));
    EvalResult ev = t.evaluate(cases);
    CHECK(ev.cases.size() == 1);
}
