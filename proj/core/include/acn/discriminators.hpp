// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acn/ad.hpp"

namespace acn {

/// Discriminators emit raw logits; probability squashing lives inside the
/// adversarial losses where it can be computed stably.
struct DiscriminatorConfig {
    int in_channels = 4;
    std::vector<int> widths = {8, 16, 32, 64};  // desk-scale 64/128/256/512
    int spatial_rank = 2;
    double leaky_slope = 0.2;

    void validate() const;  // >= 2 layers, positive widths
};

/// Fully-convolutional per-position classifier over self-information maps:
/// one stride-2 conv (kernel 4, pad 1) per width, then a 1x1 logit map.
/// A 64x64 input with 4 widths lands on a 4x4 logit grid.
class EntropyDiscriminator {
public:
    EntropyDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);

    /// map: [B, C, S...] -> logits [B, 1, S / 2^layers ...]
    ad::Var forward(const ad::Var& map) const;

    const DiscriminatorConfig& config() const { return cfg_; }
    const std::vector<ad::Var>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    std::uint64_t checksum() const;

private:
    DiscriminatorConfig cfg_;
    std::vector<ad::Var> ws_, bs_;
    std::vector<ad::Var> params_;
    std::vector<std::string> names_;
};

/// Global verdict on bottleneck features: two conv(3) layers, global average
/// pooling, then a zero-initialized affine map to one logit per sample.
class KnowledgeDiscriminator {
public:
    KnowledgeDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);

    /// bottleneck: [B, C, S...] -> logits [B, 1]
    ad::Var forward(const ad::Var& bottleneck) const;

    const DiscriminatorConfig& config() const { return cfg_; }
    const std::vector<ad::Var>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    std::uint64_t checksum() const;

private:
    DiscriminatorConfig cfg_;
    std::vector<ad::Var> ws_, bs_;  // two conv layers
    ad::Var fc_w_, fc_b_;
    std::vector<ad::Var> params_;
    std::vector<std::string> names_;
};

}  // namespace acn
