// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "acn/error.hpp"
#include "acn/hash.hpp"

namespace fs = std::filesystem;

namespace acn {

using ad::Var;
using i64 = std::int64_t;

namespace {

std::string join_ints(const std::vector<i64>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::vector<i64> parse_int_list(const std::string& s) {
    std::vector<i64> out;
    std::string tok;
    for (char c : s) {
        if (c == ',' || c == 'x' || c == ' ') {
            if (!tok.empty()) out.push_back(std::stoll(tok));
            tok.clear();
        } else {
            tok += c;
        }
    }
    if (!tok.empty()) out.push_back(std::stoll(tok));
    return out;
}

Var zero_scalar() { return ad::constant(Tensor({1})); }

}  // namespace

void TrainConfig::validate() const {
    mask.validate();
    weights.validate();
    if (!(base_lr > 0.0)) throw ConfigError("TrainConfig: base_lr must be > 0");
    if (poly_power < 0.0) throw ConfigError("TrainConfig: poly_power must be >= 0");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (steps_per_epoch < 1) throw ConfigError("TrainConfig: steps_per_epoch must be >= 1");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("TrainConfig: tau must be > 0");
    if (eval_interval < 1) throw ConfigError("TrainConfig: eval_interval must be >= 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("TrainConfig: val_fraction must be in [0, 1)");
    if (num_classes != kNumClasses)
        throw ConfigError("TrainConfig: the BraTS label set fixes num_classes at 4");
    if (spatial_rank != 2 && spatial_rank != 3)
        throw ConfigError("TrainConfig: spatial_rank must be 2 or 3");
    if (int(patch_size.size()) != spatial_rank)
        throw ConfigError("TrainConfig: patch rank must equal spatial_rank");
    BackboneConfig bb;
    bb.in_channels = kNumModalities;
    bb.num_classes = num_classes;
    bb.levels = levels;
    bb.base_width = base_width;
    bb.spatial_rank = spatial_rank;
    bb.validate();
    const i64 divisor = bb.spatial_divisor();
    for (auto d : patch_size)
        if (d < divisor || d % divisor != 0)
            throw ConfigError("TrainConfig: patch dim " + std::to_string(d) +
                              " must be a positive multiple of " + std::to_string(divisor));
    if (use_ena) {
        const i64 den_div = i64(1) << d_en_widths.size();
        for (auto d : patch_size)
            if (d % den_div != 0 || d < den_div)
                throw ConfigError("TrainConfig: with the entropy discriminator on, patch dim " +
                                  std::to_string(d) + " must be a multiple of " +
                                  std::to_string(den_div));
    }
}

std::int64_t TrainConfig::effective_ramp_length() const {
    if (weights.ramp_length > 0) return weights.ramp_length;
    const i64 total = i64(epochs) * i64(steps_per_epoch);
    return std::max<i64>(1, (total * 2) / 5);
}

KvDoc TrainConfig::to_kv() const {
    KvDoc doc;
    doc.set("train.mask", mask.token());
    doc.set_double("train.base_lr", base_lr);
    doc.set_double("train.poly_power", poly_power);
    doc.set_int("train.epochs", epochs);
    doc.set_int("train.steps_per_epoch", steps_per_epoch);
    doc.set_int("train.batch_size", batch_size);
    doc.set("train.patch", join_ints(patch_size));
    doc.set_double("train.tau", tau);
    doc.set_bool("train.use_ena", use_ena);
    doc.set_bool("train.use_kna", use_kna);
    doc.set_bool("train.use_mmi", use_mmi);
    doc.set_bool("train.mmi_detach_targets", mmi_detach_targets);
    doc.set_int("train.seed", i64(seed));
    doc.set_int("train.eval_interval", eval_interval);
    doc.set_double("train.val_fraction", val_fraction);
    doc.set_double("loss.lambda_multi", weights.lambda_multi);
    doc.set_double("loss.lambda_uni", weights.lambda_uni);
    doc.set_double("loss.lambda0", weights.lambda0);
    doc.set_double("loss.lambda1", weights.lambda1);
    doc.set_double("loss.lambda2", weights.lambda2);
    doc.set_double("loss.ramp_amplitude", weights.ramp_amplitude);
    doc.set_int("loss.ramp_length", weights.ramp_length);
    doc.set_int("net.levels", levels);
    doc.set_int("net.base_width", base_width);
    doc.set_int("net.num_classes", num_classes);
    doc.set_int("net.spatial_rank", spatial_rank);
    doc.set("net.d_en_widths", join_ints(d_en_widths));
    doc.set("net.d_kn_widths", join_ints(d_kn_widths));
    return doc;
}

TrainConfig TrainConfig::from_kv(const KvDoc& doc) {
    TrainConfig cfg;
    if (doc.has("train.mask")) cfg.mask = ModalityMask::parse(doc.get("train.mask"));
    cfg.base_lr = doc.get_double_or("train.base_lr", cfg.base_lr);
    cfg.poly_power = doc.get_double_or("train.poly_power", cfg.poly_power);
    cfg.epochs = int(doc.get_int_or("train.epochs", cfg.epochs));
    cfg.steps_per_epoch = int(doc.get_int_or("train.steps_per_epoch", cfg.steps_per_epoch));
    cfg.batch_size = int(doc.get_int_or("train.batch_size", cfg.batch_size));
    if (doc.has("train.patch")) cfg.patch_size = parse_int_list(doc.get("train.patch"));
    cfg.tau = doc.get_double_or("train.tau", cfg.tau);
    cfg.use_ena = doc.get_bool_or("train.use_ena", cfg.use_ena);
    cfg.use_kna = doc.get_bool_or("train.use_kna", cfg.use_kna);
    cfg.use_mmi = doc.get_bool_or("train.use_mmi", cfg.use_mmi);
    cfg.mmi_detach_targets = doc.get_bool_or("train.mmi_detach_targets", cfg.mmi_detach_targets);
    cfg.seed = std::uint64_t(doc.get_int_or("train.seed", i64(cfg.seed)));
    cfg.eval_interval = int(doc.get_int_or("train.eval_interval", cfg.eval_interval));
    cfg.val_fraction = doc.get_double_or("train.val_fraction", cfg.val_fraction);
    cfg.weights.lambda_multi = doc.get_double_or("loss.lambda_multi", cfg.weights.lambda_multi);
    cfg.weights.lambda_uni = doc.get_double_or("loss.lambda_uni", cfg.weights.lambda_uni);
    cfg.weights.lambda0 = doc.get_double_or("loss.lambda0", cfg.weights.lambda0);
    cfg.weights.lambda1 = doc.get_double_or("loss.lambda1", cfg.weights.lambda1);
    cfg.weights.lambda2 = doc.get_double_or("loss.lambda2", cfg.weights.lambda2);
    cfg.weights.ramp_amplitude = doc.get_double_or("loss.ramp_amplitude", cfg.weights.ramp_amplitude);
    cfg.weights.ramp_length = doc.get_int_or("loss.ramp_length", cfg.weights.ramp_length);
    cfg.levels = int(doc.get_int_or("net.levels", cfg.levels));
    cfg.base_width = int(doc.get_int_or("net.base_width", cfg.base_width));
    cfg.num_classes = int(doc.get_int_or("net.num_classes", cfg.num_classes));
    cfg.spatial_rank = int(doc.get_int_or("net.spatial_rank", cfg.spatial_rank));
    if (doc.has("net.d_en_widths")) {
        cfg.d_en_widths.clear();
        for (auto v : parse_int_list(doc.get("net.d_en_widths"))) cfg.d_en_widths.push_back(int(v));
    }
    if (doc.has("net.d_kn_widths")) {
        cfg.d_kn_widths.clear();
        for (auto v : parse_int_list(doc.get("net.d_kn_widths"))) cfg.d_kn_widths.push_back(int(v));
    }
    cfg.validate();
    return cfg;
}

std::string TrainConfig::config_hash() const { return hash_hex(to_kv().serialize()); }

double poly_lr(std::int64_t epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch > cfg.epochs)
        throw ConfigError("poly_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(cfg.epochs) + "]");
    return cfg.base_lr * std::pow(1.0 - double(epoch) / double(cfg.epochs), cfg.poly_power);
}

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng seeder(cfg_.seed);

    BackboneConfig bb;
    bb.num_classes = cfg_.num_classes;
    bb.levels = cfg_.levels;
    bb.base_width = cfg_.base_width;
    bb.spatial_rank = cfg_.spatial_rank;

    bb.in_channels = kNumModalities;
    multi_ = std::make_unique<Backbone>(bb, seeder.derive(1));
    bb.in_channels = cfg_.mask.count();
    uni_ = std::make_unique<Backbone>(bb, seeder.derive(2));

    DiscriminatorConfig den;
    den.in_channels = cfg_.num_classes;
    den.widths = cfg_.d_en_widths;
    den.spatial_rank = cfg_.spatial_rank;
    d_en_ = std::make_unique<EntropyDiscriminator>(den, seeder.derive(3));

    DiscriminatorConfig dkn;
    dkn.in_channels = multi_->level_channels(cfg_.levels - 1);
    dkn.widths = cfg_.d_kn_widths;
    dkn.spatial_rank = cfg_.spatial_rank;
    d_kn_ = std::make_unique<KnowledgeDiscriminator>(dkn, seeder.derive(4));

    std::vector<int> level_ch;
    for (int k = 0; k < cfg_.levels; ++k) level_ch.push_back(multi_->level_channels(k));
    mmi_ = std::make_unique<MmiModule>(level_ch, cfg_.spatial_rank, seeder.derive(5));

    opt_multi_ = std::make_unique<Adam>(multi_->parameters());
    opt_uni_ = std::make_unique<Adam>(uni_->parameters());
    opt_mmi_ = std::make_unique<Adam>(mmi_->parameters());
    opt_d_en_ = std::make_unique<Adam>(d_en_->parameters());
    opt_d_kn_ = std::make_unique<Adam>(d_kn_->parameters());

    data_rng_ = Rng(seeder.derive(6));
}

double Trainer::current_lr() const { return poly_lr(epoch_, cfg_); }

namespace {
void validate_batch(const Batch& batch, const TrainConfig& cfg) {
    const int rank = cfg.spatial_rank + 2;
    if (batch.x_multi.rank() != rank || batch.x_uni.rank() != rank || batch.y_onehot.rank() != rank)
        throw ConfigError("train_step: batch tensors must be [B, C, spatial...]");
    if (batch.x_multi.dim(1) != kNumModalities)
        throw ConfigError("train_step: x_multi must carry all 4 modalities");
    if (batch.x_uni.dim(1) != cfg.mask.count())
        throw ConfigError("train_step: x_uni has " + std::to_string(batch.x_uni.dim(1)) +
                          " channels, mask '" + cfg.mask.token() + "' expects " +
                          std::to_string(cfg.mask.count()));
    if (batch.y_onehot.dim(1) != cfg.num_classes)
        throw ConfigError("train_step: y_onehot channel count mismatch");
}
}  // namespace

StepResult Trainer::step_generators(const Batch& batch) {
    validate_batch(batch, cfg_);
    const double lr = current_lr();

    opt_multi_->zero_grad();
    opt_uni_->zero_grad();
    opt_mmi_->zero_grad();
    // Phase A leaves stray gradients on frozen discriminators; wipe them so
    // phase B starts clean.
    ad::zero_grad(d_en_->parameters());
    ad::zero_grad(d_kn_->parameters());

    BackboneOutput mo = multi_->forward(ad::constant(batch.x_multi));
    BackboneOutput uo = uni_->forward(ad::constant(batch.x_uni));
    Var probs_m = ad::softmax_channels(mo.logits, 1.0);
    Var probs_u = ad::softmax_channels(uo.logits, 1.0);

    LossParts parts;
    parts.dice_multi = dice_loss(probs_m, batch.y_onehot);
    parts.dice_uni = dice_loss(probs_u, batch.y_onehot);
    parts.consistency =
        consistency_loss(soften_logits(mo.logits, cfg_.tau), soften_logits(uo.logits, cfg_.tau));
    parts.en_adv_gen = cfg_.use_ena
                           ? adversarial_g_loss(d_en_->forward(self_information(probs_u).channels))
                           : zero_scalar();
    parts.kn_adv_gen = cfg_.use_kna ? adversarial_g_loss(d_kn_->forward(uo.bottleneck)) : zero_scalar();
    if (cfg_.use_mmi) {
        FeaturePairSet pairs{mo.encoder_features, uo.encoder_features};
        parts.mi = mmi_->loss(pairs, cfg_.mmi_detach_targets);
    } else {
        parts.mi = zero_scalar();
    }

    LossWeights w = cfg_.weights;
    w.ramp_length = cfg_.effective_ramp_length();
    TotalLoss tl;
    try {
        tl = total_loss(parts, w, step_);
    } catch (const NumericError& e) {
        LossBreakdown bd;
        bd.dice_multi = parts.dice_multi.value()[0];
        bd.dice_uni = parts.dice_uni.value()[0];
        bd.consistency = parts.consistency.value()[0];
        bd.en_adv_gen = parts.en_adv_gen.value()[0];
        bd.kn_adv_gen = parts.kn_adv_gen.value()[0];
        bd.mi = parts.mi.value()[0];
        throw NumericError(std::string(e.what()) + " [" + bd.to_string() + "]");
    }

    ad::backward(tl.total);
    opt_multi_->step(lr);
    opt_uni_->step(lr);
    if (cfg_.use_mmi) opt_mmi_->step(lr);

    StepResult res;
    res.gen = tl.breakdown;
    res.lr = lr;
    res.step = step_;
    ++step_;
    return res;
}

std::pair<double, double> Trainer::step_discriminators(const Batch& batch) {
    validate_batch(batch, cfg_);
    if (!cfg_.use_ena && !cfg_.use_kna) return {0.0, 0.0};
    const double lr = current_lr();

    // Recompute discriminator inputs from the updated generators, with no
    // gradient path back into them.
    Tensor i_multi, i_uni, r_multi, r_uni;
    {
        ad::NoGradGuard ng;
        BackboneOutput mo = multi_->forward(ad::constant(batch.x_multi));
        BackboneOutput uo = uni_->forward(ad::constant(batch.x_uni));
        if (cfg_.use_ena) {
            i_multi = self_information(ad::softmax_channels(mo.logits, 1.0)).channels.value();
            i_uni = self_information(ad::softmax_channels(uo.logits, 1.0)).channels.value();
        }
        if (cfg_.use_kna) {
            r_multi = mo.bottleneck.value();
            r_uni = uo.bottleneck.value();
        }
    }

    double den_loss = 0.0, dkn_loss = 0.0;
    if (cfg_.use_ena) {
        opt_d_en_->zero_grad();
        Var loss = adversarial_d_loss(d_en_->forward(ad::constant(i_multi)),
                                      d_en_->forward(ad::constant(i_uni)));
        den_loss = loss.value()[0];
        if (!std::isfinite(den_loss))
            throw NumericError("step_discriminators: entropy discriminator loss is not finite");
        ad::backward(loss);
        opt_d_en_->step(lr);
    }
    if (cfg_.use_kna) {
        opt_d_kn_->zero_grad();
        Var loss = adversarial_d_loss(d_kn_->forward(ad::constant(r_multi)),
                                      d_kn_->forward(ad::constant(r_uni)));
        dkn_loss = loss.value()[0];
        if (!std::isfinite(dkn_loss))
            throw NumericError("step_discriminators: knowledge discriminator loss is not finite");
        ad::backward(loss);
        opt_d_kn_->step(lr);
    }
    return {den_loss, dkn_loss};
}

StepResult Trainer::train_step(const Batch& batch) {
    StepResult res = step_generators(batch);
    auto [den, dkn] = step_discriminators(batch);
    res.d_en_loss = den;
    res.d_kn_loss = dkn;
    return res;
}

std::vector<Case> Trainer::normalize_cases(const std::vector<Case>& cases) {
    std::vector<Case> out;
    out.reserve(cases.size());
    for (const auto& c : cases) out.push_back({c.id, zscore_normalize(c.volume), c.labels});
    return out;
}

Batch Trainer::sample_batch(const std::vector<Case>& normalized_cases) {
    if (normalized_cases.empty()) throw DataError("sample_batch: no cases");
    const auto& patch = cfg_.patch_size;
    const i64 B = cfg_.batch_size;
    const int rank = cfg_.spatial_rank;
    const i64 divisor = i64(1) << (cfg_.levels - 1);

    i64 patch_sp = 1;
    for (auto d : patch) patch_sp *= d;
    std::vector<i64> multi_shape = {B, kNumModalities};
    multi_shape.insert(multi_shape.end(), patch.begin(), patch.end());
    std::vector<i64> uni_shape = {B, cfg_.mask.count()};
    uni_shape.insert(uni_shape.end(), patch.begin(), patch.end());
    std::vector<i64> y_shape = {B, cfg_.num_classes};
    y_shape.insert(y_shape.end(), patch.begin(), patch.end());

    Batch batch{Tensor(multi_shape), Tensor(uni_shape), Tensor(y_shape)};
    for (i64 b = 0; b < B; ++b) {
        const auto& c =
            normalized_cases[std::size_t(data_rng_.uniform_int(0, i64(normalized_cases.size()) - 1))];
        const auto sp = c.volume.spatial_shape();
        if (int(sp.size()) != rank)
            throw DataError("sample_batch: case " + c.id + " has spatial rank " +
                            std::to_string(sp.size()) + ", config expects " + std::to_string(rank));
        std::vector<i64> origin(std::size_t(rank), 0);
        for (int a = 0; a < rank; ++a) {
            const i64 limit = sp[std::size_t(a)] - patch[std::size_t(a)];
            if (limit < 0)
                throw DataError("sample_batch: case " + c.id + " is smaller than the patch");
            origin[std::size_t(a)] = limit > 0 ? data_rng_.uniform_int(0, limit) : 0;
        }
        PatchPair pp = extract_patch(c.volume.channels, c.labels, origin, patch, divisor);

        std::copy_n(pp.image.data(), kNumModalities * patch_sp,
                    batch.x_multi.data() + b * kNumModalities * patch_sp);
        i64 n = 0;
        for (int m = 0; m < kNumModalities; ++m) {
            if (!cfg_.mask.present[std::size_t(m)]) continue;
            std::copy_n(pp.image.data() + m * patch_sp, patch_sp,
                        batch.x_uni.data() + (b * cfg_.mask.count() + n) * patch_sp);
            ++n;
        }
        Tensor oh = one_hot(pp.labels);
        std::copy_n(oh.data(), cfg_.num_classes * patch_sp,
                    batch.y_onehot.data() + b * cfg_.num_classes * patch_sp);
    }
    return batch;
}

Tensor Trainer::predict_probs(const Tensor& input, bool unimodal) const {
    const Backbone& net = unimodal ? *uni_ : *multi_;
    if (input.rank() != cfg_.spatial_rank + 1)
        throw ConfigError("predict_probs: expected [C, spatial...] input");
    if (input.dim(0) != net.config().in_channels)
        throw ConfigError("predict_probs: input has " + std::to_string(input.dim(0)) +
                          " channels, path expects " + std::to_string(net.config().in_channels));
    const int rank = cfg_.spatial_rank;
    const auto& patch = cfg_.patch_size;
    std::vector<i64> sp(input.shape().begin() + 1, input.shape().end());
    for (int a = 0; a < rank; ++a)
        if (sp[std::size_t(a)] < patch[std::size_t(a)])
            throw DataError("predict_probs: volume smaller than the inference window");

    // Window origins at 50% overlap, with a final window flush to the edge.
    std::vector<std::vector<i64>> axis_origins(static_cast<std::size_t>(rank));
    for (int a = 0; a < rank; ++a) {
        const i64 dim = sp[std::size_t(a)], win = patch[std::size_t(a)];
        const i64 stride = std::max<i64>(1, win / 2);
        for (i64 o = 0;; o += stride) {
            if (o + win >= dim) {
                axis_origins[std::size_t(a)].push_back(dim - win);
                break;
            }
            axis_origins[std::size_t(a)].push_back(o);
        }
    }

    i64 sp_total = 1;
    for (auto d : sp) sp_total *= d;
    std::vector<i64> probs_shape = {cfg_.num_classes};
    probs_shape.insert(probs_shape.end(), sp.begin(), sp.end());
    Tensor prob_sum(probs_shape);
    Tensor count(sp);

    SegmentationLabelMap dummy;  // extract_patch wants labels; reuse shape
    dummy.shape = sp;
    dummy.voxel_spacing.assign(std::size_t(rank), 1.0);
    dummy.labels.assign(std::size_t(sp_total), 0);

    std::vector<std::size_t> idx(static_cast<std::size_t>(rank), 0);
    ad::NoGradGuard ng;
    while (true) {
        std::vector<i64> origin(static_cast<std::size_t>(rank));
        for (int a = 0; a < rank; ++a) origin[std::size_t(a)] = axis_origins[std::size_t(a)][idx[std::size_t(a)]];

        PatchPair pp = extract_patch(input, dummy, origin, patch, 1);
        std::vector<i64> bshape = {1};
        bshape.insert(bshape.end(), pp.image.shape().begin(), pp.image.shape().end());
        BackboneOutput out = net.forward(ad::constant(pp.image.reshaped(bshape)));
        Tensor probs = ad::softmax_channels(out.logits, 1.0).value();

        // Scatter-add the window back.
        const i64 wh = patch[0];
        if (rank == 2) {
            const i64 ww = patch[1], W = sp[1];
            for (i64 c = 0; c < cfg_.num_classes; ++c)
                for (i64 i = 0; i < wh; ++i)
                    for (i64 j = 0; j < ww; ++j)
                        prob_sum[(c * sp[0] + origin[0] + i) * W + origin[1] + j] +=
                            probs[(c * wh + i) * ww + j];
            for (i64 i = 0; i < wh; ++i)
                for (i64 j = 0; j < ww; ++j) count[(origin[0] + i) * W + origin[1] + j] += 1.0;
        } else {
            const i64 wi = patch[1], wj = patch[2], H = sp[1], W = sp[2];
            for (i64 c = 0; c < cfg_.num_classes; ++c)
                for (i64 z = 0; z < wh; ++z)
                    for (i64 i = 0; i < wi; ++i)
                        for (i64 j = 0; j < wj; ++j)
                            prob_sum[((c * sp[0] + origin[0] + z) * H + origin[1] + i) * W +
                                     origin[2] + j] += probs[((c * wh + z) * wi + i) * wj + j];
            for (i64 z = 0; z < wh; ++z)
                for (i64 i = 0; i < wi; ++i)
                    for (i64 j = 0; j < wj; ++j)
                        count[((origin[0] + z) * H + origin[1] + i) * W + origin[2] + j] += 1.0;
        }

        int a = rank - 1;
        for (; a >= 0; --a) {
            if (++idx[std::size_t(a)] < axis_origins[std::size_t(a)].size()) break;
            idx[std::size_t(a)] = 0;
        }
        if (a < 0) break;
    }

    for (i64 c = 0; c < cfg_.num_classes; ++c)
        for (i64 i = 0; i < sp_total; ++i) prob_sum[c * sp_total + i] /= count[i];
    return prob_sum;
}

EvalResult Trainer::evaluate_path(const std::vector<Case>& cases, bool unimodal) const {
    if (cases.empty()) throw DataError("evaluate: no cases");
    EvalResult result;
    for (const auto& raw : cases) {
        Case c{raw.id, zscore_normalize(raw.volume), raw.labels};
        Tensor input = unimodal ? apply_modality_mask(c.volume, cfg_.mask) : c.volume.channels;
        Tensor probs = predict_probs(input, unimodal);

        SegmentationLabelMap pred;
        pred.shape = c.labels.shape;
        pred.voxel_spacing = c.labels.voxel_spacing;
        const i64 sp = pred.numel();
        pred.labels.resize(std::size_t(sp));
        for (i64 i = 0; i < sp; ++i) {
            int best = 0;
            double bv = probs[i];
            for (int cl = 1; cl < cfg_.num_classes; ++cl)
                if (probs[cl * sp + i] > bv) {
                    bv = probs[cl * sp + i];
                    best = cl;
                }
            pred.labels[std::size_t(i)] = class_to_label(best);
        }

        SubregionMasks pm = map_nested_subregions(pred);
        SubregionMasks gm = map_nested_subregions(c.labels);
        const BinaryMask* ps[3] = {&pm.et, &pm.tc, &pm.wt};
        const BinaryMask* gs[3] = {&gm.et, &gm.tc, &gm.wt};
        EvalCaseResult cr;
        cr.id = c.id;
        for (int r = 0; r < 3; ++r) {
            cr.dsc[std::size_t(r)] = dsc(*ps[r], *gs[r]);
            Hd95Result h = hd95(*ps[r], *gs[r]);
            cr.hd95[std::size_t(r)] = h.mm;
            cr.hd95_sentinel[std::size_t(r)] = h.sentinel;
        }
        result.cases.push_back(std::move(cr));
    }
    for (const auto& cr : result.cases)
        for (int r = 0; r < 3; ++r) {
            result.mean_dsc[std::size_t(r)] += cr.dsc[std::size_t(r)];
            result.mean_hd95[std::size_t(r)] += cr.hd95[std::size_t(r)];
        }
    for (int r = 0; r < 3; ++r) {
        result.mean_dsc[std::size_t(r)] /= double(result.cases.size());
        result.mean_hd95[std::size_t(r)] /= double(result.cases.size());
        result.mean_dsc_overall += result.mean_dsc[std::size_t(r)] / 3.0;
    }
    return result;
}

EvalResult Trainer::evaluate(const std::vector<Case>& cases) const { return evaluate_path(cases, true); }

EvalResult Trainer::evaluate_multimodal(const std::vector<Case>& cases) const {
    return evaluate_path(cases, false);
}

double Trainer::mean_prediction_entropy(const std::vector<Case>& cases, bool unimodal) const {
    if (cases.empty()) throw DataError("mean_prediction_entropy: no cases");
    double total = 0.0;
    i64 voxels = 0;
    for (const auto& raw : cases) {
        Case c{raw.id, zscore_normalize(raw.volume), raw.labels};
        Tensor input = unimodal ? apply_modality_mask(c.volume, cfg_.mask) : c.volume.channels;
        Tensor probs = predict_probs(input, unimodal);
        const i64 sp = probs.numel_from(1);
        for (i64 i = 0; i < sp; ++i) {
            double h = 0.0;
            for (int cl = 0; cl < cfg_.num_classes; ++cl) {
                double p = probs[cl * sp + i];
                if (p > 0.0) h -= p * std::log(std::max(p, kProbFloor));
            }
            total += h;
        }
        voxels += sp;
    }
    return total / double(voxels);
}

std::pair<Tensor, Tensor> Trainer::entropy_map_channels(const Batch& batch) const {
    validate_batch(batch, cfg_);
    ad::NoGradGuard ng;
    BackboneOutput mo = multi_->forward(ad::constant(batch.x_multi));
    BackboneOutput uo = uni_->forward(ad::constant(batch.x_uni));
    Tensor im = self_information(ad::softmax_channels(mo.logits, 1.0)).channels.value();
    Tensor iu = self_information(ad::softmax_channels(uo.logits, 1.0)).channels.value();
    return {im, iu};
}

void Trainer::fit(const std::vector<Case>& train, const std::vector<Case>& val,
                  const std::string& out_dir) {
    if (train.empty()) throw DataError("fit: training set is empty");
    fs::create_directories(out_dir);
    std::vector<Case> train_n = normalize_cases(train);

    while (epoch_ < cfg_.epochs) {
        for (int s = 0; s < cfg_.steps_per_epoch; ++s) {
            Batch batch = sample_batch(train_n);
            train_step(batch);
        }
        ++epoch_;
        const bool last_epoch = epoch_ == i64(cfg_.epochs);
        if (!val.empty() && (epoch_ % cfg_.eval_interval == 0 || last_epoch)) {
            EvalRecord rec{epoch_, evaluate(val)};
            const bool improved = rec.result.mean_dsc_overall > best_dsc_;
            history_.push_back(std::move(rec));
            if (improved) {
                best_dsc_ = history_.back().result.mean_dsc_overall;
                save(out_dir + "/best");
            }
        }
    }
    save(out_dir + "/last");
    write_metrics_csv(out_dir + "/metrics.csv");
}

void Trainer::write_metrics_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "epoch,subregion,dsc,hd95\n";
    const char* names[3] = {"et", "tc", "wt"};
    char buf[128];
    for (const auto& rec : history_)
        for (int r = 0; r < 3; ++r) {
            std::snprintf(buf, sizeof(buf), "%lld,%s,%.6f,%.6f\n",
                          static_cast<long long>(rec.epoch), names[r],
                          rec.result.mean_dsc[std::size_t(r)], rec.result.mean_hd95[std::size_t(r)]);
            out << buf;
        }
}

void Trainer::save_component(const std::string& dir, const std::string& name,
                             const std::vector<Var>& params, const Adam& opt) const {
    std::ofstream out(dir + "/" + name + ".bin", std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write component '" + name + "'");
    std::vector<const Tensor*> ts;
    for (const auto& p : params) ts.push_back(&p.value());
    write_tensors(out, ts);
    opt.serialize(out);
    if (!out) throw DataError("checkpoint: write failed for component '" + name + "'");
}

void Trainer::load_component(const std::string& dir, const std::string& name,
                             const std::vector<Var>& params, Adam& opt) {
    const std::string path = dir + "/" + name + ".bin";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint is missing component '" + name + "' (" + path + ")");
    std::vector<Tensor*> ts;
    for (const auto& p : params) ts.push_back(&p.node()->value);
    read_tensors_into(in, ts, name);
    opt.deserialize(in);
}

void Trainer::save(const std::string& dir) const {
    fs::create_directories(dir);
    cfg_.to_kv().save(dir + "/config.kv");

    KvDoc manifest;
    manifest.set("ckpt.config_hash", cfg_.config_hash());
    manifest.set_int("ckpt.step", step_);
    manifest.set_int("ckpt.epoch", epoch_);
    manifest.set_double("ckpt.best_mean_dsc", best_dsc_);
    manifest.set("ckpt.rng", data_rng_.serialize());
    manifest.set_int("ckpt.history.count", i64(history_.size()));
    for (std::size_t i = 0; i < history_.size(); ++i) {
        const auto& rec = history_[i];
        char key[64];
        std::snprintf(key, sizeof(key), "ckpt.history.%04zu", i);
        manifest.set_int(std::string(key) + ".epoch", rec.epoch);
        const char* names[3] = {"et", "tc", "wt"};
        for (int r = 0; r < 3; ++r) {
            manifest.set_double(std::string(key) + ".dsc_" + names[r],
                                rec.result.mean_dsc[std::size_t(r)]);
            manifest.set_double(std::string(key) + ".hd95_" + names[r],
                                rec.result.mean_hd95[std::size_t(r)]);
        }
    }
    manifest.save(dir + "/manifest.kv");

    save_component(dir, "multi", multi_->parameters(), *opt_multi_);
    save_component(dir, "uni", uni_->parameters(), *opt_uni_);
    save_component(dir, "d_en", d_en_->parameters(), *opt_d_en_);
    save_component(dir, "d_kn", d_kn_->parameters(), *opt_d_kn_);
    save_component(dir, "mmi", mmi_->parameters(), *opt_mmi_);
}

Trainer Trainer::load(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("checkpoint directory not found: " + dir);
    KvDoc manifest = KvDoc::load(dir + "/manifest.kv");
    KvDoc config_doc = KvDoc::load(dir + "/config.kv");
    const std::string stored_hash = manifest.get("ckpt.config_hash");
    const std::string actual_hash = hash_hex(config_doc.serialize());
    if (stored_hash != actual_hash)
        throw DataError("checkpoint config hash mismatch: manifest records " + stored_hash +
                        " but config.kv hashes to " + actual_hash);

    TrainConfig cfg = TrainConfig::from_kv(config_doc);
    Trainer t(cfg);
    t.step_ = manifest.get_int("ckpt.step");
    t.epoch_ = manifest.get_int("ckpt.epoch");
    t.best_dsc_ = manifest.get_double("ckpt.best_mean_dsc");
    t.data_rng_ = Rng::deserialize(manifest.get("ckpt.rng"));

    const i64 hist = manifest.get_int_or("ckpt.history.count", 0);
    for (i64 i = 0; i < hist; ++i) {
        char key[64];
        std::snprintf(key, sizeof(key), "ckpt.history.%04lld", static_cast<long long>(i));
        EvalRecord rec;
        rec.epoch = manifest.get_int(std::string(key) + ".epoch");
        const char* names[3] = {"et", "tc", "wt"};
        for (int r = 0; r < 3; ++r) {
            rec.result.mean_dsc[std::size_t(r)] = manifest.get_double(std::string(key) + ".dsc_" + names[r]);
            rec.result.mean_hd95[std::size_t(r)] =
                manifest.get_double(std::string(key) + ".hd95_" + names[r]);
            rec.result.mean_dsc_overall += rec.result.mean_dsc[std::size_t(r)] / 3.0;
        }
        t.history_.push_back(std::move(rec));
    }

    t.load_component(dir, "multi", t.multi_->parameters(), *t.opt_multi_);
    t.load_component(dir, "uni", t.uni_->parameters(), *t.opt_uni_);
    t.load_component(dir, "d_en", t.d_en_->parameters(), *t.opt_d_en_);
    t.load_component(dir, "d_kn", t.d_kn_->parameters(), *t.opt_d_kn_);
    t.load_component(dir, "mmi", t.mmi_->parameters(), *t.opt_mmi_);
    return t;
}

Trainer Trainer::load(const std::string& dir, const std::string& expected_config_hash) {
    Trainer t = load(dir);
    const std::string actual = t.cfg_.config_hash();
    if (actual != expected_config_hash)
        throw DataError("checkpoint config hash " + actual + " does not match expected " +
                        expected_config_hash);
    return t;
}

}  // namespace acn
