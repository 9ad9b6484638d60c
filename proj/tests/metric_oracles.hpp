// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations for the evaluation metrics and a
// random blobby-mask generator. Written independently of the production
// code paths: the oracle builds an explicit surface point list and a full
// distance matrix.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "acn/metrics.hpp"
#include "acn/random.hpp"

namespace acn::test {

inline double dsc_oracle(const BinaryMask& a, const BinaryMask& b) {
    double inter = 0, ca = 0, cb = 0;
    for (std::size_t i = 0; i < a.voxels.size(); ++i) {
        inter += (a.voxels[i] && b.voxels[i]) ? 1 : 0;
        ca += a.voxels[i] ? 1 : 0;
        cb += b.voxels[i] ? 1 : 0;
    }
    if (ca + cb == 0) return 1.0;
    return 2 * inter / (ca + cb);
}

inline double hd95_oracle(const BinaryMask& a, const BinaryMask& b) {
    auto surface = [](const BinaryMask& m) {
        std::vector<std::vector<double>> pts;
        const auto& sh = m.shape;
        const int rank = int(sh.size());
        for (std::int64_t idx = 0; idx < m.numel(); ++idx) {
            if (!m.voxels[std::size_t(idx)]) continue;
            std::vector<std::int64_t> coord(static_cast<std::size_t>(rank));
            std::int64_t rem = idx;
            for (int ax = rank - 1; ax >= 0; --ax) {
                coord[std::size_t(ax)] = rem % sh[std::size_t(ax)];
                rem /= sh[std::size_t(ax)];
            }
            bool surf = false;
            for (int ax = 0; ax < rank && !surf; ++ax)
                for (int d : {-1, 1}) {
                    auto nb = coord;
                    nb[std::size_t(ax)] += d;
                    if (nb[std::size_t(ax)] < 0 || nb[std::size_t(ax)] >= sh[std::size_t(ax)]) {
                        surf = true;
                        break;
                    }
                    std::int64_t nidx = 0;
                    for (int k = 0; k < rank; ++k)
                        nidx = nidx * sh[std::size_t(k)] + nb[std::size_t(k)];
                    if (!m.voxels[std::size_t(nidx)]) {
                        surf = true;
                        break;
                    }
                }
            if (surf) {
                std::vector<double> mm(static_cast<std::size_t>(rank));
                for (int ax = 0; ax < rank; ++ax)
                    mm[std::size_t(ax)] = double(coord[std::size_t(ax)]) * m.spacing[std::size_t(ax)];
                pts.push_back(std::move(mm));
            }
        }
        return pts;
    };
    auto pct95 = [](std::vector<double> d) {
        std::sort(d.begin(), d.end());
        if (d.size() == 1) return d[0];
        double rank = 0.95 * double(d.size() - 1);
        std::size_t lo = std::size_t(rank);
        double frac = rank - double(lo);
        return lo + 1 < d.size() ? d[lo] * (1 - frac) + d[lo + 1] * frac : d.back();
    };

    bool ea = a.count() == 0, eb = b.count() == 0;
    if (ea && eb) return 0.0;
    if (ea || eb) {
        double diag = 0;
        for (std::size_t i = 0; i < a.shape.size(); ++i) {
            double e = double(a.shape[i]) * a.spacing[i];
            diag += e * e;
        }
        return std::sqrt(diag);
    }
    auto sa = surface(a), sb = surface(b);
    auto directed = [&](const auto& from, const auto& to) {
        std::vector<double> mins;
        for (const auto& p : from) {
            double best = 1e300;
            for (const auto& q : to) {
                double s = 0;
                for (std::size_t ax = 0; ax < p.size(); ++ax) {
                    double d = p[ax] - q[ax];
                    s += d * d;
                }
                best = std::min(best, s);
            }
            mins.push_back(std::sqrt(best));
        }
        return pct95(std::move(mins));
    };
    return std::max(directed(sa, sb), directed(sb, sa));
}

/// Union of a few random balls plus salt noise.
inline BinaryMask random_mask(std::vector<std::int64_t> shape, Rng& rng,
                              std::vector<double> spacing = {}) {
    BinaryMask m = BinaryMask::zeros(shape, std::move(spacing));
    const int rank = int(shape.size());
    const int balls = int(rng.uniform_int(0, 2));
    for (int bi = 0; bi < balls; ++bi) {
        double c[3], r = rng.uniform(1.0, 4.0);
        for (int ax = 0; ax < rank; ++ax) c[ax] = rng.uniform(0.0, double(shape[std::size_t(ax)] - 1));
        for (std::int64_t idx = 0; idx < m.numel(); ++idx) {
            std::int64_t rem = idx;
            double s = 0;
            for (int ax = rank - 1; ax >= 0; --ax) {
                double d = double(rem % shape[std::size_t(ax)]) - c[ax];
                s += d * d;
                rem /= shape[std::size_t(ax)];
            }
            if (s <= r * r) m.voxels[std::size_t(idx)] = 1;
        }
    }
    for (int k = 0; k < 5; ++k)
        m.voxels[std::size_t(rng.uniform_int(0, m.numel() - 1))] = rng.uniform() < 0.7 ? 1 : 0;
    return m;
}

}  // namespace acn::test
