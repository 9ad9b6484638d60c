// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// The co-training loop: both segmentation paths and the variational heads
// update together against the weighted objective with the discriminators
// frozen (phase A), then each discriminator takes its own step on freshly
// recomputed, gradient-isolated inputs (phase B). Ablation flags remove
// exactly their weighted term and the matching discriminator update.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "acn/backbone.hpp"
#include "acn/dataset.hpp"
#include "acn/discriminators.hpp"
#include "acn/kvtext.hpp"
#include "acn/losses.hpp"
#include "acn/mmi.hpp"
#include "acn/optimizer.hpp"
#include "acn/volume.hpp"

namespace acn {

struct TrainConfig {
    ModalityMask mask;  // unimodal input subset; mandatory
    LossWeights weights;
    double base_lr = 1e-4;
    double poly_power = 0.9;
    int epochs = 300;  // epoch_max of the poly schedule
    int steps_per_epoch = 50;
    int batch_size = 1;
    std::vector<std::int64_t> patch_size = {64, 64};
    double tau = 1.0;  // consistency softening temperature
    bool use_ena = true;
    bool use_kna = true;
    bool use_mmi = true;
    bool mmi_detach_targets = true;
    std::uint64_t seed = 0;
    int eval_interval = 1;  // epochs between validation passes
    double val_fraction = 1.0 / 3.0;

    int levels = 4;
    int base_width = 8;
    int num_classes = 4;
    int spatial_rank = 2;
    std::vector<int> d_en_widths = {8, 16, 32, 64};
    std::vector<int> d_kn_widths = {32, 32};

    void validate() const;
    std::int64_t effective_ramp_length() const;
    KvDoc to_kv() const;
    static TrainConfig from_kv(const KvDoc& doc);
    /// Hash of the canonical kv rendering; checkpoints refuse to load under
    /// a different hash.
    std::string config_hash() const;
};

/// base_lr * (1 - epoch/epoch_max)^power; epoch outside [0, epoch_max]
/// is rejected.
double poly_lr(std::int64_t epoch, const TrainConfig& cfg);

struct Batch {
    Tensor x_multi;   // [B, 4, patch...]
    Tensor x_uni;     // [B, N, patch...]
    Tensor y_onehot;  // [B, C, patch...]
};

struct StepResult {
    LossBreakdown gen;
    double d_en_loss = 0.0;  // NaN-free; 0 when the module is ablated
    double d_kn_loss = 0.0;
    double lr = 0.0;
    std::int64_t step = 0;
};

struct EvalCaseResult {
    std::string id;
    // Subregion order: et, tc, wt.
    std::array<double, 3> dsc{};
    std::array<double, 3> hd95{};
    std::array<bool, 3> hd95_sentinel{};
};

struct EvalResult {
    std::vector<EvalCaseResult> cases;
    std::array<double, 3> mean_dsc{};
    std::array<double, 3> mean_hd95{};
    double mean_dsc_overall = 0.0;
};

struct EvalRecord {
    std::int64_t epoch = 0;
    EvalResult result;
};

class Trainer {
public:
    explicit Trainer(const TrainConfig& cfg);

    /// Phase A + phase B on one batch.
    StepResult train_step(const Batch& batch);
    /// Phase A only: both paths + heads step against the full objective,
    /// discriminators frozen.
    StepResult step_generators(const Batch& batch);
    /// Phase B only: discriminator updates on recomputed, detached inputs.
    /// Honors the ablation flags. Returns (d_en_loss, d_kn_loss).
    std::pair<double, double> step_discriminators(const Batch& batch);

    /// Draws a batch (random case, random patch origin) from normalized
    /// cases using the trainer's data stream.
    Batch sample_batch(const std::vector<Case>& normalized_cases);
    /// Z-score all channels of every case once, up front.
    static std::vector<Case> normalize_cases(const std::vector<Case>& cases);

    /// Runs the remaining epochs with the poly schedule, evaluating the
    /// unimodal path on `val` every eval_interval epochs, tracking the
    /// best-mean-DSC checkpoint under out_dir/best and the final state
    /// under out_dir/last, plus out_dir/metrics.csv.
    void fit(const std::vector<Case>& train, const std::vector<Case>& val, const std::string& out_dir);

    /// Unimodal-path evaluation: sliding-window inference (50% overlap,
    /// mean-probability fusion), argmax to labels, nested subregions,
    /// DSC/HD95 per case and averaged.
    EvalResult evaluate(const std::vector<Case>& cases) const;
    /// Same machinery on the multimodal path (full-modality input).
    EvalResult evaluate_multimodal(const std::vector<Case>& cases) const;

    /// Mean per-voxel Shannon entropy of a path's predictions over cases.
    double mean_prediction_entropy(const std::vector<Case>& cases, bool unimodal) const;

    /// Whole-volume class probabilities for a prepared (normalized, masked)
    /// input, via sliding window.
    Tensor predict_probs(const Tensor& input, bool unimodal) const;

    void save(const std::string& dir) const;
    static Trainer load(const std::string& dir);
    /// Refuses when the stored config hash differs from `expected`.
    static Trainer load(const std::string& dir, const std::string& expected_config_hash);

    const TrainConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return step_; }
    std::int64_t epoch() const { return epoch_; }
    const std::vector<EvalRecord>& metric_history() const { return history_; }
    double best_mean_dsc() const { return best_dsc_; }

    const Backbone& multi_path() const { return *multi_; }
    const Backbone& uni_path() const { return *uni_; }
    Backbone& multi_path() { return *multi_; }
    Backbone& uni_path() { return *uni_; }
    const EntropyDiscriminator& entropy_discriminator() const { return *d_en_; }
    const KnowledgeDiscriminator& knowledge_discriminator() const { return *d_kn_; }
    const MmiModule& mmi() const { return *mmi_; }

    std::uint64_t checksum_multi() const { return multi_->checksum(); }
    std::uint64_t checksum_uni() const { return uni_->checksum(); }
    std::uint64_t checksum_d_en() const { return d_en_->checksum(); }
    std::uint64_t checksum_d_kn() const { return d_kn_->checksum(); }
    std::uint64_t checksum_mmi() const { return mmi_->checksum(); }

    /// Entropy maps (per-voxel Shannon entropy, no gradients) of both paths
    /// for one batch: (I_multi, I_uni) as [B, C, S...] self-information
    /// channel maps.
    std::pair<Tensor, Tensor> entropy_map_channels(const Batch& batch) const;

    /// Writes the (epoch, subregion, dsc, hd95) table.
    void write_metrics_csv(const std::string& path) const;

private:
    double current_lr() const;
    EvalResult evaluate_path(const std::vector<Case>& cases, bool unimodal) const;
    void save_component(const std::string& dir, const std::string& name,
                        const std::vector<ad::Var>& params, const Adam& opt) const;
    void load_component(const std::string& dir, const std::string& name,
                        const std::vector<ad::Var>& params, Adam& opt);

    TrainConfig cfg_;
    std::unique_ptr<Backbone> multi_, uni_;
    std::unique_ptr<EntropyDiscriminator> d_en_;
    std::unique_ptr<KnowledgeDiscriminator> d_kn_;
    std::unique_ptr<MmiModule> mmi_;
    std::unique_ptr<Adam> opt_multi_, opt_uni_, opt_mmi_, opt_d_en_, opt_d_kn_;
    Rng data_rng_;
    std::int64_t step_ = 0;
    std::int64_t epoch_ = 0;
    std::vector<EvalRecord> history_;
    double best_dsc_ = -1.0;
};

}  // namespace acn
