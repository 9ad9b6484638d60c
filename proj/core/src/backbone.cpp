// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/backbone.hpp"

#include <cmath>

#include "acn/error.hpp"
#include "acn/tensor.hpp"

namespace acn {

using ad::Var;
using i64 = std::int64_t;

void BackboneConfig::validate() const {
    if (levels < 2) throw ConfigError("BackboneConfig: levels must be >= 2");
    if (base_width < 4) throw ConfigError("BackboneConfig: base_width must be >= 4");
    if (num_classes < 2) throw ConfigError("BackboneConfig: num_classes must be >= 2");
    if (in_channels < 1) throw ConfigError("BackboneConfig: in_channels must be >= 1");
    if (spatial_rank != 2 && spatial_rank != 3)
        throw ConfigError("BackboneConfig: spatial_rank must be 2 or 3");
    if (leaky_slope < 0.0) throw ConfigError("BackboneConfig: leaky_slope must be >= 0");
}

namespace {

Tensor he_weights(int c_out, int c_in, int kernel, int rank, Rng& rng) {
    std::vector<i64> shape = {c_out, c_in};
    i64 fan_in = c_in;
    for (int a = 0; a < rank; ++a) {
        shape.push_back(kernel);
        fan_in *= kernel;
    }
    return Tensor::randn(shape, rng, 0.0, std::sqrt(2.0 / double(fan_in)));
}

}  // namespace

Backbone::ConvBlock Backbone::make_block(int c_in, int c_out, int kernel, Rng& rng,
                                         const std::string& name) {
    ConvBlock blk;
    blk.w = ad::parameter(he_weights(c_out, c_in, kernel, cfg_.spatial_rank, rng));
    blk.b = ad::parameter(Tensor({c_out}));
    blk.gamma = ad::parameter(Tensor::full({c_out}, 1.0));
    blk.beta = ad::parameter(Tensor({c_out}));
    params_.push_back(blk.w);
    names_.push_back(name + ".w");
    params_.push_back(blk.b);
    names_.push_back(name + ".b");
    params_.push_back(blk.gamma);
    names_.push_back(name + ".gamma");
    params_.push_back(blk.beta);
    names_.push_back(name + ".beta");
    return blk;
}

Var Backbone::run_block(const ConvBlock& blk, const Var& x, i64 pad) const {
    Var y = ad::conv(x, blk.w, blk.b, /*stride=*/1, pad);
    y = ad::instance_norm(y, blk.gamma, blk.beta);
    return ad::leaky_relu(y, cfg_.leaky_slope);
}

int Backbone::level_channels(int level) const { return cfg_.base_width << level; }

Backbone::Backbone(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int K = cfg_.levels;

    for (int k = 0; k < K; ++k) {
        const int c_in = k == 0 ? cfg_.in_channels : level_channels(k - 1);
        const int c_out = level_channels(k);
        const std::string base = "enc" + std::to_string(k);
        enc_.push_back(make_block(c_in, c_out, 3, rng, base + ".0"));
        enc_.push_back(make_block(c_out, c_out, 3, rng, base + ".1"));
    }
    for (int k = K - 2; k >= 0; --k) {
        const int c_skip = level_channels(k);
        const int c_up = level_channels(k + 1);
        const std::string base = "dec" + std::to_string(k);
        dec_.push_back(make_block(c_up + c_skip, c_skip, 3, rng, base + ".0"));
        dec_.push_back(make_block(c_skip, c_skip, 3, rng, base + ".1"));
    }
    // Zero-initialized projection: an untrained network emits uniform
    // class probabilities.
    std::vector<i64> fw = {cfg_.num_classes, cfg_.base_width};
    for (int a = 0; a < cfg_.spatial_rank; ++a) fw.push_back(1);
    final_w_ = ad::parameter(Tensor(fw));
    final_b_ = ad::parameter(Tensor({cfg_.num_classes}));
    params_.push_back(final_w_);
    names_.push_back("final.w");
    params_.push_back(final_b_);
    names_.push_back("final.b");
}

BackboneOutput Backbone::forward(const Var& input) const {
    const Tensor& x = input.value();
    if (x.rank() != cfg_.spatial_rank + 2)
        throw ConfigError("Backbone::forward: expected [B, C, spatial...] with rank " +
                          std::to_string(cfg_.spatial_rank) + ", got " + x.shape_str());
    if (x.dim(1) != cfg_.in_channels)
        throw ConfigError("Backbone::forward: input has " + std::to_string(x.dim(1)) +
                          " channels, network expects " + std::to_string(cfg_.in_channels));
    const i64 divisor = cfg_.spatial_divisor();
    for (int a = 2; a < x.rank(); ++a)
        if (x.dim(a) % divisor != 0)
            throw ConfigError("Backbone::forward: spatial dim " + std::to_string(x.dim(a)) +
                              " is not divisible by " + std::to_string(divisor));

    const int K = cfg_.levels;
    BackboneOutput out;
    Var h = input;
    for (int k = 0; k < K; ++k) {
        if (k > 0) h = ad::max_pool2(h);
        h = run_block(enc_[std::size_t(2 * k)], h, 1);
        h = run_block(enc_[std::size_t(2 * k + 1)], h, 1);
        out.encoder_features.push_back(h);
    }
    out.bottleneck = out.encoder_features.back();

    for (int k = K - 2; k >= 0; --k) {
        const std::size_t di = std::size_t(2 * (K - 2 - k));
        h = ad::upsample_nearest2(h);
        h = ad::concat_channels(h, out.encoder_features[std::size_t(k)]);
        h = run_block(dec_[di], h, 1);
        h = run_block(dec_[di + 1], h, 1);
    }
    out.logits = ad::conv(h, final_w_, final_b_, 1, 0);
    return out;
}

BackboneOutput Backbone::forward(const Tensor& input) const {
    return forward(ad::constant(input));
}

std::uint64_t Backbone::checksum() const {
    std::vector<const Tensor*> ts;
    ts.reserve(params_.size());
    for (const auto& p : params_) ts.push_back(&p.value());
    return tensors_checksum(ts);
}

}  // namespace acn
