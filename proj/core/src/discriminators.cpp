// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/discriminators.hpp"

#include <cmath>

#include "acn/error.hpp"

namespace acn {

using ad::Var;
using i64 = std::int64_t;

void DiscriminatorConfig::validate() const {
    if (in_channels < 1) throw ConfigError("DiscriminatorConfig: in_channels must be >= 1");
    if (widths.size() < 2) throw ConfigError("DiscriminatorConfig: need at least 2 layers");
    for (int w : widths)
        if (w < 1) throw ConfigError("DiscriminatorConfig: widths must be positive");
    if (spatial_rank != 2 && spatial_rank != 3)
        throw ConfigError("DiscriminatorConfig: spatial_rank must be 2 or 3");
}

namespace {

Tensor conv_weights(int c_out, int c_in, int kernel, int rank, Rng& rng) {
    std::vector<i64> shape = {c_out, c_in};
    i64 fan_in = c_in;
    for (int a = 0; a < rank; ++a) {
        shape.push_back(kernel);
        fan_in *= kernel;
    }
    return Tensor::randn(shape, rng, 0.0, std::sqrt(2.0 / double(fan_in)));
}

void check_channels(const Tensor& x, int expected, const char* who) {
    if (x.rank() < 3)
        throw ConfigError(std::string(who) + ": expected [B, C, spatial...], got " + x.shape_str());
    if (x.dim(1) != expected)
        throw ConfigError(std::string(who) + ": input has " + std::to_string(x.dim(1)) +
                          " channels, expected " + std::to_string(expected));
}

}  // namespace

EntropyDiscriminator::EntropyDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    int c_in = cfg_.in_channels;
    for (std::size_t l = 0; l < cfg_.widths.size(); ++l) {
        int c_out = cfg_.widths[l];
        ws_.push_back(ad::parameter(conv_weights(c_out, c_in, 4, cfg_.spatial_rank, rng)));
        bs_.push_back(ad::parameter(Tensor({c_out})));
        params_.push_back(ws_.back());
        names_.push_back("layer" + std::to_string(l) + ".w");
        params_.push_back(bs_.back());
        names_.push_back("layer" + std::to_string(l) + ".b");
        c_in = c_out;
    }
    // Zero-initialized logit head: the untrained discriminator says 0.5.
    std::vector<i64> fw = {1, c_in};
    for (int a = 0; a < cfg_.spatial_rank; ++a) fw.push_back(1);
    ws_.push_back(ad::parameter(Tensor(fw)));
    bs_.push_back(ad::parameter(Tensor({1})));
    params_.push_back(ws_.back());
    names_.push_back("head.w");
    params_.push_back(bs_.back());
    names_.push_back("head.b");
}

Var EntropyDiscriminator::forward(const Var& map) const {
    check_channels(map.value(), cfg_.in_channels, "EntropyDiscriminator");
    Var h = map;
    const std::size_t layers = cfg_.widths.size();
    for (std::size_t l = 0; l < layers; ++l) {
        h = ad::conv(h, ws_[l], bs_[l], /*stride=*/2, /*pad=*/1);
        h = ad::leaky_relu(h, cfg_.leaky_slope);
    }
    return ad::conv(h, ws_[layers], bs_[layers], 1, 0);
}

std::uint64_t EntropyDiscriminator::checksum() const {
    std::vector<const Tensor*> ts;
    for (const auto& p : params_) ts.push_back(&p.value());
    return tensors_checksum(ts);
}

KnowledgeDiscriminator::KnowledgeDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int w0 = cfg_.widths[0];
    const int w1 = cfg_.widths[1];
    ws_.push_back(ad::parameter(conv_weights(w0, cfg_.in_channels, 3, cfg_.spatial_rank, rng)));
    bs_.push_back(ad::parameter(Tensor({w0})));
    ws_.push_back(ad::parameter(conv_weights(w1, w0, 3, cfg_.spatial_rank, rng)));
    bs_.push_back(ad::parameter(Tensor({w1})));
    fc_w_ = ad::parameter(Tensor({1, w1}));  // zero-initialized verdict
    fc_b_ = ad::parameter(Tensor({1}));
    params_ = {ws_[0], bs_[0], ws_[1], bs_[1], fc_w_, fc_b_};
    names_ = {"conv0.w", "conv0.b", "conv1.w", "conv1.b", "fc.w", "fc.b"};
}

Var KnowledgeDiscriminator::forward(const Var& bottleneck) const {
    check_channels(bottleneck.value(), cfg_.in_channels, "KnowledgeDiscriminator");
    Var h = ad::leaky_relu(ad::conv(bottleneck, ws_[0], bs_[0], 1, 1), cfg_.leaky_slope);
    h = ad::leaky_relu(ad::conv(h, ws_[1], bs_[1], 1, 1), cfg_.leaky_slope);
    h = ad::global_avg_pool(h);
    return ad::linear(h, fc_w_, fc_b_);
}

std::uint64_t KnowledgeDiscriminator::checksum() const {
    std::vector<const Tensor*> ts;
    for (const auto& p : params_) ts.push_back(&p.value());
    return tensors_checksum(ts);
}

}  // namespace acn
