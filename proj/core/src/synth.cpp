// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/synth.hpp"

#include <cmath>
#include <sstream>

#include "acn/error.hpp"
#include "acn/random.hpp"

namespace acn {

std::array<std::array<double, 4>, kNumTissues> SynthConfig::default_contrast() {
    // Rough relative contrasts: edema bright on Flair/T2, enhancing core
    // bright on T1ce, necrotic core dark on T1/T1ce. Units are arbitrary.
    //                            Flair  T1    T1ce  T2
    return {{{0.00, 0.00, 0.00, 0.00},   // background
             {0.45, 0.70, 0.55, 0.50},   // brain
             {0.55, 0.30, 0.25, 0.60},   // NCR/NET
             {0.90, 0.45, 0.80, 0.90},   // edema
             {0.65, 0.55, 1.00, 0.70}}}; // enhancing
}

void SynthConfig::validate() const {
    if (spatial_shape.size() < 2 || spatial_shape.size() > 3)
        throw ConfigError("SynthConfig: spatial rank must be 2 or 3");
    for (auto d : spatial_shape)
        if (d < 8) throw ConfigError("SynthConfig: spatial dims must be >= 8");
    if (tumor_count_min < 1 || tumor_count_max < tumor_count_min)
        throw ConfigError("SynthConfig: bad tumor count range");
    auto check_range = [](const RadiusRange& r, const char* name) {
        if (!(r.lo > 0.0) || r.hi < r.lo)
            throw ConfigError(std::string("SynthConfig: bad radius range for ") + name);
    };
    check_range(et_radius, "et");
    check_range(tc_radius, "tc");
    check_range(wt_radius, "wt");
    // Ordered ranges guarantee every sampled triple nests strictly.
    if (!(et_radius.hi < tc_radius.lo) || !(tc_radius.hi < wt_radius.lo))
        throw ConfigError("SynthConfig: radius ranges must nest (et.hi < tc.lo and tc.hi < wt.lo)");
    if (noise_std < 0.0) throw ConfigError("SynthConfig: noise_std must be >= 0");
}

std::string SynthConfig::canonical_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "shape=";
    for (auto d : spatial_shape) os << d << ",";
    os << ";tumors=" << tumor_count_min << ".." << tumor_count_max;
    os << ";et=" << et_radius.lo << ".." << et_radius.hi;
    os << ";tc=" << tc_radius.lo << ".." << tc_radius.hi;
    os << ";wt=" << wt_radius.lo << ".." << wt_radius.hi;
    os << ";noise=" << noise_std << ";seed=" << seed << ";contrast=";
    for (const auto& row : contrast)
        for (double v : row) os << v << ",";
    return os.str();
}

namespace {

struct Ellipsoid {
    double center[3] = {0, 0, 0};
    double radii[3] = {1, 1, 1};

    bool contains(const double* p, int rank) const {
        double s = 0.0;
        for (int a = 0; a < rank; ++a) {
            double d = (p[a] - center[a]) / radii[a];
            s += d * d;
        }
        return s <= 1.0;
    }
};

}  // namespace

SynthCase synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int rank = int(cfg.spatial_shape.size());
    const auto& sh = cfg.spatial_shape;
    std::int64_t sp = 1;
    for (auto d : sh) sp *= d;

    // Brain ellipse centered in the grid, covering ~80% of each extent.
    Ellipsoid brain;
    for (int a = 0; a < rank; ++a) {
        brain.center[a] = double(sh[std::size_t(a)] - 1) / 2.0;
        brain.radii[a] = 0.40 * double(sh[std::size_t(a)]);
    }

    const int tumors = int(rng.uniform_int(cfg.tumor_count_min, cfg.tumor_count_max));
    std::vector<Ellipsoid> wt(static_cast<std::size_t>(tumors)), tc(static_cast<std::size_t>(tumors)), et(static_cast<std::size_t>(tumors));
    for (int t = 0; t < tumors; ++t) {
        Ellipsoid w, c, e;
        double wt_max = 0.0;
        for (int a = 0; a < rank; ++a) {
            w.radii[a] = rng.uniform(cfg.wt_radius.lo, cfg.wt_radius.hi);
            c.radii[a] = rng.uniform(cfg.tc_radius.lo, cfg.tc_radius.hi);
            e.radii[a] = rng.uniform(cfg.et_radius.lo, cfg.et_radius.hi);
            wt_max = std::max(wt_max, w.radii[a]);
        }
        for (int a = 0; a < rank; ++a) {
            double margin = wt_max + 1.0;
            double lo = brain.center[a] - std::max(brain.radii[a] - margin, 0.0);
            double hi = brain.center[a] + std::max(brain.radii[a] - margin, 0.0);
            double center = rng.uniform(lo, hi);
            w.center[a] = c.center[a] = e.center[a] = center;
        }
        wt[std::size_t(t)] = w;
        tc[std::size_t(t)] = c;
        et[std::size_t(t)] = e;
    }

    SynthCase out;
    out.labels.shape = sh;
    out.labels.voxel_spacing.assign(std::size_t(rank), 1.0);
    out.labels.labels.assign(std::size_t(sp), 0);

    std::vector<std::int64_t> ch_shape = {kNumModalities};
    ch_shape.insert(ch_shape.end(), sh.begin(), sh.end());
    out.volume.channels = Tensor(ch_shape);
    out.volume.voxel_spacing.assign(std::size_t(rank), 1.0);

    std::vector<Tissue> tissue(std::size_t(sp), Tissue::Background);
    double p[3] = {0, 0, 0};
    for (std::int64_t i = 0; i < sp; ++i) {
        std::int64_t rem = i;
        for (int a = rank - 1; a >= 0; --a) {
            p[a] = double(rem % sh[std::size_t(a)]);
            rem /= sh[std::size_t(a)];
        }
        if (!brain.contains(p, rank)) continue;
        // Innermost compartment wins when tumors overlap.
        Tissue t = Tissue::Brain;
        std::uint8_t label = kLabelBackground;
        for (int k = 0; k < tumors && t == Tissue::Brain; ++k)
            if (et[std::size_t(k)].contains(p, rank)) {
                t = Tissue::Enhancing;
                label = kLabelEnhancing;
            }
        for (int k = 0; k < tumors && t == Tissue::Brain; ++k)
            if (tc[std::size_t(k)].contains(p, rank)) {
                t = Tissue::NcrNet;
                label = kLabelNcrNet;
            }
        for (int k = 0; k < tumors && t == Tissue::Brain; ++k)
            if (wt[std::size_t(k)].contains(p, rank)) {
                t = Tissue::Edema;
                label = kLabelEdema;
            }
        tissue[std::size_t(i)] = t;
        out.labels.labels[std::size_t(i)] = label;
    }

    // Render modalities voxel-major so that noise draws do not depend on the
    // number of modalities rendered before a voxel.
    for (std::int64_t i = 0; i < sp; ++i) {
        Tissue t = tissue[std::size_t(i)];
        if (t == Tissue::Background) continue;  // background stays exactly zero
        for (int m = 0; m < kNumModalities; ++m) {
            double v = cfg.contrast[std::size_t(int(t))][std::size_t(m)];
            if (cfg.noise_std > 0.0) v += rng.normal(0.0, cfg.noise_std);
            out.volume.channels[m * sp + i] = v;
        }
    }
    return out;
}

}  // namespace acn
