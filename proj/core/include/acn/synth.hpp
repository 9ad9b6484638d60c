// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "acn/volume.hpp"

namespace acn {

/// Tissue classes rendered by the phantom generator, indexing the rows of
/// the contrast table. Background stays exactly zero so that brain-masked
/// normalization has a nonzero support to work with.
enum class Tissue : int { Background = 0, Brain = 1, NcrNet = 2, Edema = 3, Enhancing = 4 };
constexpr int kNumTissues = 5;

struct RadiusRange {
    double lo = 0.0, hi = 0.0;
};

/// Configuration for synthetic multimodal phantoms: a brain ellipse holding
/// one or more nested tumor ellipsoids (enhancing core inside tumor core
/// inside whole tumor), rendered per modality from a contrast table plus
/// Gaussian noise. Fully deterministic given the seed.
struct SynthConfig {
    std::vector<std::int64_t> spatial_shape = {64, 64};
    int tumor_count_min = 1;
    int tumor_count_max = 1;
    RadiusRange et_radius{3.0, 5.0};
    RadiusRange tc_radius{6.0, 9.0};
    RadiusRange wt_radius{10.0, 14.0};
    /// Mean intensity per tissue class (row) per modality (column).
    std::array<std::array<double, 4>, kNumTissues> contrast = default_contrast();
    double noise_std = 0.05;
    std::uint64_t seed = 0;

    static std::array<std::array<double, 4>, kNumTissues> default_contrast();
    void validate() const;  // radii ranges must nest; noise_std >= 0
    std::string canonical_text() const;
};

struct SynthCase {
    MultimodalVolume volume;
    SegmentationLabelMap labels;
};

SynthCase synth_generate(const SynthConfig& cfg);

}  // namespace acn
