// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Modality-mutual information transfer: per-level variational heads predict
// the multimodal encoder features from the unimodal ones under a Gaussian
// with heteroscedastic mean and homoscedastic per-channel variance; the
// weighted sum of negative log-densities lower-bounds the mutual
// information lost to the missing modalities.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acn/ad.hpp"

namespace acn {

/// Per-level weights, strictly increasing and summing to 1; deeper levels
/// carry more semantic content. Default gamma_k = k / sum(1..K).
std::vector<double> level_weights(int levels);
void validate_level_weights(const std::vector<double>& gamma);

/// One aligned feature pair (multimodal m, unimodal u) per encoder level.
struct FeaturePairSet {
    std::vector<ad::Var> multi;
    std::vector<ad::Var> uni;

    std::size_t size() const { return multi.size(); }
    void validate() const;  // K >= 1, matching shapes per level
};

/// Negative Gaussian log-density with the constant dropped:
/// sum_c sum_x [ log sigma_c + (m - mu)^2 / (2 sigma_c^2) ], averaged over
/// the batch. sigma is per-channel and must be positive.
ad::Var neg_log_q(const ad::Var& m, const ad::Var& mu, const ad::Var& sigma);

/// The mean network of one level: three 1x1 channel-mixing convolutions
/// (hidden width = channel count, zero-initialized final layer) plus the
/// raw variance parameter rho with sigma = softplus(rho), initialized so
/// sigma = 1.
class VariationalHead {
public:
    VariationalHead(int channels, int spatial_rank, std::uint64_t seed, double leaky_slope = 0.01);

    ad::Var mean(const ad::Var& u) const;  // mu(u), same shape as u
    ad::Var sigma() const;                 // softplus(rho), [C]

    int channels() const { return channels_; }
    const std::vector<ad::Var>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }

private:
    int channels_;
    double leaky_slope_;
    std::vector<ad::Var> ws_, bs_;
    ad::Var rho_;
    std::vector<ad::Var> params_;
    std::vector<std::string> names_;
};

/// Heads for all K encoder levels of a backbone path.
class MmiModule {
public:
    MmiModule(const std::vector<int>& level_channels, int spatial_rank, std::uint64_t seed);

    /// L_MI = sum_k gamma_k * neg_log_q(detach(m_k), mu_k(u_k), sigma_k).
    /// The multimodal features are treated as fixed targets; gradients flow
    /// into the heads and into the unimodal path. `detach_multi = false`
    /// exposes the alternative for comparison runs.
    ad::Var loss(const FeaturePairSet& pairs, bool detach_multi = true) const;
    ad::Var loss(const FeaturePairSet& pairs, const std::vector<double>& gamma,
                 bool detach_multi = true) const;

    const std::vector<double>& gamma() const { return gamma_; }
    const std::vector<VariationalHead>& heads() const { return heads_; }
    std::vector<ad::Var> parameters() const;
    std::vector<std::string> parameter_names() const;
    std::uint64_t checksum() const;

private:
    std::vector<VariationalHead> heads_;
    std::vector<double> gamma_;
};

}  // namespace acn
