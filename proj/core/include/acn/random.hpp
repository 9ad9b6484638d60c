// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace acn {

/// Deterministic, serializable PRNG (splitmix64 core, Box-Muller normals).
/// Self-contained so that seeded runs reproduce bitwise across platforms;
/// std::normal_distribution is implementation-defined and unusable here.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        state_ = seed;
        has_spare_ = false;
        spare_ = 0.0;
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller; the spare value is cached and
    /// participates in state serialization.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derive an independent stream for a named sub-component.
    std::uint64_t derive(std::uint64_t stream_id) const;

    /// State round-trip for checkpointing (hex text, fixed field order).
    std::string serialize() const;
    static Rng deserialize(const std::string& text);

private:
    std::uint64_t state_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace acn
