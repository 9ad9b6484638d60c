// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/volume.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "acn/error.hpp"

namespace acn {

const char* modality_token(Modality m) {
    switch (m) {
        case Modality::Flair: return "fl";
        case Modality::T1: return "t1";
        case Modality::T1ce: return "t1c";
        case Modality::T2: return "t2";
    }
    return "?";
}

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::Flair: return "Flair";
        case Modality::T1: return "T1";
        case Modality::T1ce: return "T1ce";
        case Modality::T2: return "T2";
    }
    return "?";
}

const char* modality_suffix(Modality m) {
    switch (m) {
        case Modality::Flair: return "flair";
        case Modality::T1: return "t1";
        case Modality::T1ce: return "t1ce";
        case Modality::T2: return "t2";
    }
    return "?";
}

int ModalityMask::count() const {
    int n = 0;
    for (bool p : present) n += p ? 1 : 0;
    return n;
}

void ModalityMask::validate() const {
    if (count() < 1) throw ConfigError("ModalityMask: at least one modality must be present");
}

std::string ModalityMask::token() const {
    std::string out;
    for (int i = 0; i < kNumModalities; ++i) {
        if (!present[std::size_t(i)]) continue;
        if (!out.empty()) out += '_';
        out += modality_token(Modality(i));
    }
    return out;
}

ModalityMask ModalityMask::all() {
    ModalityMask m;
    m.present = {true, true, true, true};
    return m;
}

ModalityMask ModalityMask::parse(const std::string& text) {
    ModalityMask mask;
    std::string tok;
    auto flush = [&]() {
        if (tok.empty()) return;
        bool known = false;
        for (int i = 0; i < kNumModalities; ++i) {
            if (tok == modality_token(Modality(i))) {
                mask.present[std::size_t(i)] = true;
                known = true;
                break;
            }
        }
        if (!known)
            throw ConfigError("unknown modality token '" + tok + "'; valid tokens are {fl, t1, t1c, t2}");
        tok.clear();
    };
    for (char c : text) {
        if (c == ',' || c == '_' || c == ' ' || c == '+') {
            flush();
        } else {
            tok += char(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    flush();
    mask.validate();
    return mask;
}

std::vector<ModalityMask> enumerate_modality_subsets() {
    // Row order of the standard 15-subset report: singles (T2, T1ce, T1,
    // Flair), then pairs, triples, and the full set.
    static const std::array<std::array<bool, 4>, 15> rows = {{
        {false, false, false, true},   // t2
        {false, false, true, false},   // t1c
        {false, true, false, false},   // t1
        {true, false, false, false},   // fl
        {false, false, true, true},    // t1c t2
        {false, true, true, false},    // t1 t1c
        {true, true, false, false},    // fl t1
        {false, true, false, true},    // t1 t2
        {true, false, false, true},    // fl t2
        {true, false, true, false},    // fl t1c
        {true, true, true, false},     // fl t1 t1c
        {true, true, false, true},     // fl t1 t2
        {true, false, true, true},     // fl t1c t2
        {false, true, true, true},     // t1 t1c t2
        {true, true, true, true},      // full
    }};
    std::vector<ModalityMask> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        ModalityMask m;
        m.present = r;
        out.push_back(m);
    }
    return out;
}

int subset_id(const ModalityMask& mask) {
    mask.validate();
    auto subsets = enumerate_modality_subsets();
    for (std::size_t i = 0; i < subsets.size(); ++i)
        if (subsets[i].present == mask.present) return int(i) + 1;
    throw ConfigError("subset_id: mask not in enumeration");  // unreachable for valid masks
}

ModalityMask subset_from_id(int id) {
    if (id < 1 || id > 15) throw ConfigError("subset id must be in 1..15, got " + std::to_string(id));
    return enumerate_modality_subsets()[std::size_t(id - 1)];
}

std::vector<std::int64_t> MultimodalVolume::spatial_shape() const {
    return {channels.shape().begin() + 1, channels.shape().end()};
}

void MultimodalVolume::validate() const {
    if (channels.rank() < 3 || channels.rank() > 4)
        throw DataError("MultimodalVolume: expected [4, spatial...] with rank 2 or 3 spatial, got " +
                        channels.shape_str());
    if (channels.dim(0) != kNumModalities)
        throw DataError("MultimodalVolume: expected exactly 4 channels, got " +
                        std::to_string(channels.dim(0)));
    if (voxel_spacing.size() != std::size_t(spatial_rank()))
        throw DataError("MultimodalVolume: spacing rank mismatch");
    for (double s : voxel_spacing)
        if (!(s > 0.0)) throw DataError("MultimodalVolume: spacing must be positive");
}

std::int64_t SegmentationLabelMap::numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void SegmentationLabelMap::validate() const {
    if (shape.size() < 2 || shape.size() > 3) throw DataError("SegmentationLabelMap: rank must be 2 or 3");
    if (std::int64_t(labels.size()) != numel()) throw DataError("SegmentationLabelMap: size mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::uint8_t v = labels[i];
        if (v != 0 && v != 1 && v != 2 && v != 4)
            throw DataError("SegmentationLabelMap: label value " + std::to_string(int(v)) +
                            " at voxel " + std::to_string(i) + " is outside {0, 1, 2, 4}");
    }
}

int label_to_class(std::uint8_t label) {
    switch (label) {
        case 0: return 0;
        case 1: return 1;
        case 2: return 2;
        case 4: return 3;
        default:
            throw DataError("label value " + std::to_string(int(label)) + " is outside {0, 1, 2, 4}");
    }
}

std::uint8_t class_to_label(int cls) {
    static const std::uint8_t lut[4] = {0, 1, 2, 4};
    if (cls < 0 || cls >= kNumClasses) throw ConfigError("class index out of range");
    return lut[cls];
}

SubregionMasks map_nested_subregions(const SegmentationLabelMap& labels) {
    labels.validate();
    std::vector<double> spacing = labels.voxel_spacing;
    if (spacing.empty()) spacing.assign(labels.shape.size(), 1.0);
    SubregionMasks out{BinaryMask::zeros(labels.shape, spacing), BinaryMask::zeros(labels.shape, spacing),
                       BinaryMask::zeros(labels.shape, spacing)};
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        std::uint8_t v = labels.labels[i];
        out.et.voxels[i] = v == 4;
        out.tc.voxels[i] = (v == 1 || v == 4);
        out.wt.voxels[i] = (v == 1 || v == 2 || v == 4);
    }
    return out;
}

Tensor apply_modality_mask(const MultimodalVolume& vol, const ModalityMask& mask) {
    vol.validate();
    mask.validate();
    const std::int64_t sp = vol.channels.numel_from(1);
    std::vector<std::int64_t> out_shape = vol.channels.shape();
    out_shape[0] = mask.count();
    Tensor out(out_shape);
    std::int64_t n = 0;
    for (int m = 0; m < kNumModalities; ++m) {
        if (!mask.present[std::size_t(m)]) continue;
        std::copy_n(vol.channels.data() + m * sp, sp, out.data() + n * sp);
        ++n;
    }
    return out;
}

MultimodalVolume zscore_normalize(const MultimodalVolume& vol) {
    vol.validate();
    MultimodalVolume out = vol;
    const std::int64_t sp = vol.channels.numel_from(1);
    constexpr double kStdFloor = 1e-8;
    for (int c = 0; c < kNumModalities; ++c) {
        double* x = out.channels.data() + c * sp;
        std::int64_t nz = 0;
        for (std::int64_t i = 0; i < sp; ++i) nz += x[i] != 0.0 ? 1 : 0;
        const bool brain_only = nz > 0 && nz < sp;
        const std::int64_t n = brain_only ? nz : sp;

        double mean = 0.0;
        for (std::int64_t i = 0; i < sp; ++i)
            if (!brain_only || x[i] != 0.0) mean += x[i];
        mean /= double(n);
        double var = 0.0;
        for (std::int64_t i = 0; i < sp; ++i)
            if (!brain_only || x[i] != 0.0) {
                double d = x[i] - mean;
                var += d * d;
            }
        var /= double(n);
        double denom = std::max(std::sqrt(var), kStdFloor);
        for (std::int64_t i = 0; i < sp; ++i)
            if (!brain_only || x[i] != 0.0) x[i] = (x[i] - mean) / denom;
    }
    return out;
}

PatchPair extract_patch(const Tensor& channels, const SegmentationLabelMap& labels,
                        const std::vector<std::int64_t>& origin,
                        const std::vector<std::int64_t>& size, std::int64_t alignment) {
    const int rank = channels.rank() - 1;
    std::vector<std::int64_t> sp(channels.shape().begin() + 1, channels.shape().end());
    if (int(origin.size()) != rank || int(size.size()) != rank)
        throw ConfigError("extract_patch: origin/size rank mismatch");
    if (std::vector<std::int64_t>(labels.shape) != sp)
        throw DataError("extract_patch: labels shape differs from volume");
    if (alignment < 1) throw ConfigError("extract_patch: alignment must be >= 1");
    for (int a = 0; a < rank; ++a) {
        if (size[std::size_t(a)] < 1) throw ConfigError("extract_patch: size must be positive");
        if (size[std::size_t(a)] % alignment != 0)
            throw ConfigError("extract_patch: size " + std::to_string(size[std::size_t(a)]) +
                              " is not divisible by " + std::to_string(alignment));
        if (origin[std::size_t(a)] < 0 ||
            origin[std::size_t(a)] + size[std::size_t(a)] > sp[std::size_t(a)])
            throw ConfigError("extract_patch: patch out of bounds on axis " + std::to_string(a));
    }

    const std::int64_t C = channels.dim(0);
    std::vector<std::int64_t> out_shape = {C};
    out_shape.insert(out_shape.end(), size.begin(), size.end());
    PatchPair pair;
    pair.image = Tensor(out_shape);
    pair.labels.shape = size;
    pair.labels.voxel_spacing = labels.voxel_spacing;
    pair.labels.labels.resize(std::size_t(pair.labels.numel()));

    if (rank == 2) {
        const std::int64_t H = sp[0], W = sp[1], h = size[0], w = size[1];
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t i = 0; i < h; ++i)
                std::copy_n(channels.data() + (c * H + origin[0] + i) * W + origin[1], w,
                            pair.image.data() + (c * h + i) * w);
        for (std::int64_t i = 0; i < h; ++i)
            std::copy_n(labels.labels.data() + (origin[0] + i) * W + origin[1], w,
                        pair.labels.labels.data() + i * w);
    } else {
        const std::int64_t D = sp[0], H = sp[1], W = sp[2];
        const std::int64_t d = size[0], h = size[1], w = size[2];
        (void)D;
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t z = 0; z < d; ++z)
                for (std::int64_t i = 0; i < h; ++i)
                    std::copy_n(
                        channels.data() + ((c * sp[0] + origin[0] + z) * H + origin[1] + i) * W + origin[2],
                        w, pair.image.data() + ((c * d + z) * h + i) * w);
        for (std::int64_t z = 0; z < d; ++z)
            for (std::int64_t i = 0; i < h; ++i)
                std::copy_n(labels.labels.data() + ((origin[0] + z) * H + origin[1] + i) * W + origin[2],
                            w, pair.labels.labels.data() + (z * h + i) * w);
    }
    return pair;
}

}  // namespace acn
