// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "acn/metrics.hpp"
#include "acn/tensor.hpp"

namespace acn {

/// The four MRI contrasts, in the fixed channel order used everywhere.
enum class Modality : int { Flair = 0, T1 = 1, T1ce = 2, T2 = 3 };

constexpr int kNumModalities = 4;

/// Short tokens accepted on the command line: fl, t1, t1c, t2.
const char* modality_token(Modality m);
const char* modality_name(Modality m);
/// File suffixes used by BraTS-style case directories: flair, t1, t1ce, t2.
const char* modality_suffix(Modality m);

/// Which of the four modalities are present. At least one must be.
struct ModalityMask {
    std::array<bool, 4> present{false, false, false, false};

    int count() const;
    void validate() const;  // throws ConfigError when empty
    bool full() const { return count() == kNumModalities; }
    /// Canonical token string, e.g. "fl_t1c".
    std::string token() const;
    static ModalityMask all();
    /// Parse "fl,t2" / "fl_t2" style token lists. Unknown tokens throw
    /// ConfigError listing the valid ones.
    static ModalityMask parse(const std::string& text);
};

/// The 15 non-empty modality subsets in the canonical reporting order:
/// single modalities first, then pairs, triples, and the full set.
std::vector<ModalityMask> enumerate_modality_subsets();

/// 1-based id of a mask within the canonical ordering.
int subset_id(const ModalityMask& mask);
ModalityMask subset_from_id(int id);

/// Co-registered 4-channel intensity volume, channels [4, spatial...] in
/// modality order, spacing (mm) aligned with the spatial dims.
struct MultimodalVolume {
    Tensor channels;
    std::vector<double> voxel_spacing;

    int spatial_rank() const { return channels.rank() - 1; }
    std::vector<std::int64_t> spatial_shape() const;
    void validate() const;
};

/// Integer tumor labels over the spatial grid; values in {0, 1, 2, 4}.
struct SegmentationLabelMap {
    std::vector<std::int64_t> shape;
    std::vector<double> voxel_spacing;
    std::vector<std::uint8_t> labels;

    std::int64_t numel() const;
    void validate() const;  // throws DataError naming any offending value
};

constexpr std::uint8_t kLabelBackground = 0;
constexpr std::uint8_t kLabelNcrNet = 1;  // necrotic / non-enhancing core
constexpr std::uint8_t kLabelEdema = 2;
constexpr std::uint8_t kLabelEnhancing = 4;

/// Index <-> label lookup for the C=4 classification head.
int label_to_class(std::uint8_t label);
std::uint8_t class_to_label(int cls);
constexpr int kNumClasses = 4;

/// Nested binary subregions: et <= tc <= wt voxelwise.
struct SubregionMasks {
    BinaryMask et, tc, wt;
};

/// ET = {4}, TC = {1, 4}, WT = {1, 2, 4}.
SubregionMasks map_nested_subregions(const SegmentationLabelMap& labels);

/// Stack the present channels, preserving modality order ->
/// [N, spatial...] with N = mask.count().
Tensor apply_modality_mask(const MultimodalVolume& vol, const ModalityMask& mask);

/// Per-channel z-score. Statistics are taken over nonzero (brain) voxels
/// when any exist and only those voxels are rescaled, leaving the zero
/// background untouched; channels with no zeros normalize everywhere.
/// Constant channels come out all-zero (std floor 1e-8).
MultimodalVolume zscore_normalize(const MultimodalVolume& vol);

/// Contiguous crop of volume + labels. Every size component must be
/// divisible by `alignment` (the backbone's downsampling factor 2^(K-1)).
struct PatchPair {
    Tensor image;  // [N, size...]
    SegmentationLabelMap labels;
};
PatchPair extract_patch(const Tensor& channels, const SegmentationLabelMap& labels,
                        const std::vector<std::int64_t>& origin,
                        const std::vector<std::int64_t>& size, std::int64_t alignment);

}  // namespace acn
