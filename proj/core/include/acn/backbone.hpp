// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acn/ad.hpp"

namespace acn {

/// Encoder-decoder segmentation network: K encoder levels of two
/// conv(3)+instance-norm+leaky blocks with 2x pooling between levels, a
/// symmetric decoder with skip connections, and a zero-initialized 1x1
/// projection to class logits. Channel width doubles per level.
struct BackboneConfig {
    int in_channels = 4;
    int num_classes = 4;   // C
    int levels = 4;        // K
    int base_width = 8;    // channels at level 1
    int spatial_rank = 2;  // 2 or 3
    double leaky_slope = 0.01;

    void validate() const;
    /// Inputs must be divisible by this on every spatial axis: 2^(K-1).
    std::int64_t spatial_divisor() const { return std::int64_t(1) << (levels - 1); }
};

struct BackboneOutput {
    ad::Var logits;                         // [B, C, S...] at input resolution
    std::vector<ad::Var> encoder_features;  // K features, level k at 1/2^(k-1)
    ad::Var bottleneck;                     // == encoder_features.back()
};

class Backbone {
public:
    Backbone(const BackboneConfig& cfg, std::uint64_t seed);

    BackboneOutput forward(const ad::Var& input) const;
    BackboneOutput forward(const Tensor& input) const;

    const BackboneConfig& config() const { return cfg_; }
    const std::vector<ad::Var>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    /// Channels of encoder feature k (0-based level index).
    int level_channels(int level) const;
    std::uint64_t checksum() const;

private:
    struct ConvBlock {
        ad::Var w, b, gamma, beta;
    };
    ConvBlock make_block(int c_in, int c_out, int kernel, Rng& rng, const std::string& name);
    ad::Var run_block(const ConvBlock& blk, const ad::Var& x, std::int64_t pad) const;

    BackboneConfig cfg_;
    std::vector<ConvBlock> enc_;  // 2 per level
    std::vector<ConvBlock> dec_;  // 2 per level below the bottleneck
    ad::Var final_w_, final_b_;
    std::vector<ad::Var> params_;
    std::vector<std::string> names_;
};

}  // namespace acn
