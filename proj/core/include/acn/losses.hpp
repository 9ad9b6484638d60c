// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable objectives of the co-training system: soft Dice, the
// symmetric-KL output consistency term, weighted self-information maps, the
// two adversarial terms (entropy and knowledge), the Gaussian ramp-up and
// the combined weighted objective. Natural logarithms everywhere.

#pragma once

#include <string>
#include <vector>

#include "acn/ad.hpp"
#include "acn/volume.hpp"

namespace acn {

/// Probabilities are clamped to [kProbFloor, 1] inside logarithms; the
/// matching ceiling for a single -log term is kMaxNegLog.
constexpr double kProbFloor = 1e-8;
extern const double kMaxNegLog;  // -log(kProbFloor)

/// Trade-off weights of the overall objective, defaulting to the tuned
/// values lambda = (0.2, 0.8, 0.001, 0.0002, 0.5) with ramp amplitude 0.1.
struct LossWeights {
    double lambda_multi = 0.2;   // multimodal Dice
    double lambda_uni = 0.8;     // unimodal Dice
    double lambda0 = 0.001;      // entropy-adversarial generator term
    double lambda1 = 0.0002;     // knowledge-adversarial generator term
    double lambda2 = 0.5;        // mutual-information transfer
    double ramp_amplitude = 0.1;
    /// Ramp length L in optimizer steps; 0 = resolved by the trainer to
    /// 40% of the total step budget.
    std::int64_t ramp_length = 0;

    void validate() const;  // all nonnegative, L >= 0
};

/// softmax(logits / tau) per voxel. tau <= 0 is rejected.
ad::Var soften_logits(const ad::Var& logits, double tau);

/// Symmetric KL between two soft segmentations, averaged over classes and
/// voxels: (1 / (C * V)) * sum_c [ sum_x a log(a/b) + sum_x b log(b/a) ].
/// Terms with p = 0 contribute 0; log arguments are floored at kProbFloor.
ad::Var consistency_loss(const ad::Var& probs_a, const ad::Var& probs_b);

/// Per-class weighted self-information -p log p plus its channel sum (the
/// per-voxel Shannon entropy). `channels` feeds the entropy discriminator;
/// `scalar` is the entropy map used for reporting and export.
struct SelfInformation {
    ad::Var channels;  // [B, C, S...], values in [0, 1/e]
    ad::Var scalar;    // [B, 1, S...], values in [0, log C]
};
SelfInformation self_information(const ad::Var& probs);

/// Discriminator objective from raw logits (sigmoid folded in, numerically
/// stable): minimize -mean[ log D(real) + log(1 - D(fake)) ]. Each -log term
/// is capped at kMaxNegLog.
ad::Var adversarial_d_loss(const ad::Var& real_logits, const ad::Var& fake_logits);

/// Non-saturating generator objective: minimize -mean log D(fake).
ad::Var adversarial_g_loss(const ad::Var& fake_logits);

/// Soft Dice loss, 1 - mean over foreground classes of
/// (2 sum(p t) + eps) / (sum p + sum t + eps), eps = 1e-5. With C = 1 the
/// single channel is scored directly; otherwise class 0 is background and
/// excluded from the mean.
ad::Var dice_loss(const ad::Var& probs, const Tensor& target_onehot);

/// One-hot encoding of a label patch, [C, spatial...] (no batch dim).
Tensor one_hot(const SegmentationLabelMap& labels);

/// Gaussian ramp-up omega(S) = amplitude * exp(-5 (1 - S/L)^2), S clamped
/// to L from above. L <= 0 and S < 0 are rejected.
double ramp_up(std::int64_t step, std::int64_t ramp_length, double amplitude = 0.1);

/// The six scalar parts of the overall objective, pre-weighting.
struct LossParts {
    ad::Var dice_multi;
    ad::Var dice_uni;
    ad::Var consistency;
    ad::Var en_adv_gen;  // entropy-adversarial generator term
    ad::Var kn_adv_gen;  // knowledge-adversarial generator term
    ad::Var mi;          // mutual-information transfer
};

/// Itemized result: raw parts, weighted contributions and the total.
struct LossBreakdown {
    double dice_multi = 0, dice_uni = 0, consistency = 0, en_adv_gen = 0, kn_adv_gen = 0, mi = 0;
    double w_dice_multi = 0, w_dice_uni = 0, w_consistency = 0, w_en_adv_gen = 0, w_kn_adv_gen = 0,
           w_mi = 0;
    double omega = 0;
    double total = 0;
    std::string to_string() const;
};

struct TotalLoss {
    ad::Var total;
    LossBreakdown breakdown;
};

/// lambda_multi * dice_m + lambda_uni * dice_u + omega(S) * consistency
/// + lambda0 * en_adv + lambda1 * kn_adv + lambda2 * mi.
/// A non-finite part is rejected by name (NumericError).
TotalLoss total_loss(const LossParts& parts, const LossWeights& w, std::int64_t step);

}  // namespace acn
