// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acn/error.hpp"

namespace acn {

BinaryMask BinaryMask::zeros(std::vector<std::int64_t> shape, std::vector<double> spacing) {
    BinaryMask m;
    m.shape = std::move(shape);
    if (spacing.empty()) spacing.assign(m.shape.size(), 1.0);
    m.spacing = std::move(spacing);
    m.voxels.assign(std::size_t(m.numel()), 0);
    m.validate();
    return m;
}

std::int64_t BinaryMask::numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::int64_t BinaryMask::count() const {
    std::int64_t c = 0;
    for (auto v : voxels) c += v ? 1 : 0;
    return c;
}

void BinaryMask::validate() const {
    if (shape.size() < 2 || shape.size() > 3) throw ConfigError("BinaryMask: rank must be 2 or 3");
    if (spacing.size() != shape.size()) throw ConfigError("BinaryMask: spacing rank mismatch");
    for (auto s : spacing)
        if (!(s > 0.0)) throw ConfigError("BinaryMask: spacing must be positive");
    if (std::int64_t(voxels.size()) != numel()) throw ConfigError("BinaryMask: voxel count mismatch");
}

double dsc(const BinaryMask& a, const BinaryMask& b) {
    if (a.shape != b.shape) throw ConfigError("dsc: shape mismatch");
    std::int64_t inter = 0, ca = 0, cb = 0;
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        bool va = a.voxels[std::size_t(i)] != 0;
        bool vb = b.voxels[std::size_t(i)] != 0;
        inter += (va && vb) ? 1 : 0;
        ca += va ? 1 : 0;
        cb += vb ? 1 : 0;
    }
    if (ca + cb == 0) return 1.0;
    return 2.0 * double(inter) / double(ca + cb);
}

std::vector<std::int64_t> surface_voxels(const BinaryMask& m) {
    std::vector<std::int64_t> out;
    const int rank = int(m.shape.size());
    const auto& sh = m.shape;

    auto at = [&](std::int64_t i) { return m.voxels[std::size_t(i)] != 0; };
    if (rank == 2) {
        const std::int64_t H = sh[0], W = sh[1];
        for (std::int64_t i = 0; i < H; ++i)
            for (std::int64_t j = 0; j < W; ++j) {
                std::int64_t idx = i * W + j;
                if (!at(idx)) continue;
                bool surf = (i == 0 || !at(idx - W)) || (i == H - 1 || !at(idx + W)) ||
                            (j == 0 || !at(idx - 1)) || (j == W - 1 || !at(idx + 1));
                if (surf) out.push_back(idx);
            }
    } else {
        const std::int64_t D = sh[0], H = sh[1], W = sh[2];
        for (std::int64_t d = 0; d < D; ++d)
            for (std::int64_t i = 0; i < H; ++i)
                for (std::int64_t j = 0; j < W; ++j) {
                    std::int64_t idx = (d * H + i) * W + j;
                    if (!at(idx)) continue;
                    bool surf = (d == 0 || !at(idx - H * W)) || (d == D - 1 || !at(idx + H * W)) ||
                                (i == 0 || !at(idx - W)) || (i == H - 1 || !at(idx + W)) ||
                                (j == 0 || !at(idx - 1)) || (j == W - 1 || !at(idx + 1));
                    if (surf) out.push_back(idx);
                }
    }
    return out;
}

double percentile_interpolated(std::vector<double> values, double fraction) {
    if (values.empty()) throw ConfigError("percentile: no values");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    double rank = fraction * double(values.size() - 1);
    auto lo = std::size_t(std::floor(rank));
    if (lo + 1 >= values.size()) return values.back();
    double frac = rank - double(lo);
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

namespace {

// Physical coordinates of a linear index.
void unravel_mm(std::int64_t idx, const std::vector<std::int64_t>& shape,
                const std::vector<double>& spacing, double* out) {
    for (int a = int(shape.size()) - 1; a >= 0; --a) {
        out[a] = double(idx % shape[std::size_t(a)]) * spacing[std::size_t(a)];
        idx /= shape[std::size_t(a)];
    }
}

double directed_hd95(const std::vector<std::int64_t>& from, const std::vector<std::int64_t>& to,
                     const std::vector<std::int64_t>& shape, const std::vector<double>& spacing) {
    const int rank = int(shape.size());
    std::vector<double> to_mm(to.size() * std::size_t(rank));
    double pt[3];
    for (std::size_t t = 0; t < to.size(); ++t) {
        unravel_mm(to[t], shape, spacing, pt);
        for (int a = 0; a < rank; ++a) to_mm[t * std::size_t(rank) + std::size_t(a)] = pt[a];
    }
    std::vector<double> dists;
    dists.reserve(from.size());
    for (auto f : from) {
        unravel_mm(f, shape, spacing, pt);
        double best = std::numeric_limits<double>::max();
        for (std::size_t t = 0; t < to.size(); ++t) {
            double s = 0.0;
            for (int a = 0; a < rank; ++a) {
                double d = pt[a] - to_mm[t * std::size_t(rank) + std::size_t(a)];
                s += d * d;
            }
            best = std::min(best, s);
        }
        dists.push_back(std::sqrt(best));
    }
    return percentile_interpolated(std::move(dists), 0.95);
}

}  // namespace

Hd95Result hd95(const BinaryMask& a, const BinaryMask& b) {
    if (a.shape != b.shape) throw ConfigError("hd95: shape mismatch");
    if (a.spacing != b.spacing) throw ConfigError("hd95: spacing mismatch");

    const bool ea = a.count() == 0, eb = b.count() == 0;
    if (ea && eb) return {0.0, false};
    if (ea || eb) {
        double diag = 0.0;
        for (std::size_t i = 0; i < a.shape.size(); ++i) {
            double e = double(a.shape[i]) * a.spacing[i];
            diag += e * e;
        }
        return {std::sqrt(diag), true};
    }

    auto sa = surface_voxels(a);
    auto sb = surface_voxels(b);
    double ab = directed_hd95(sa, sb, a.shape, a.spacing);
    double ba = directed_hd95(sb, sa, a.shape, a.spacing);
    return {std::max(ab, ba), false};
}

}  // namespace acn
