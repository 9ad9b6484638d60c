// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/random.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "acn/error.hpp"

namespace acn {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ConfigError("Rng::uniform_int: empty range");
    std::uint64_t span = std::uint64_t(hi - lo) + 1;
    // Rejection sampling to stay unbiased.
    std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % span);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit && span != 0);
    return lo + std::int64_t(x % span);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 pushed away from 0 so log stays finite.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::derive(std::uint64_t stream_id) const {
    std::uint64_t z = state_ ^ (0x6a09e667f3bcc909ULL + stream_id * 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string Rng::serialize() const {
    char buf[64];
    std::uint64_t spare_bits;
    static_assert(sizeof(spare_bits) == sizeof(spare_));
    __builtin_memcpy(&spare_bits, &spare_, sizeof(spare_bits));
    std::snprintf(buf, sizeof(buf), "%016llx:%d:%016llx",
                  static_cast<unsigned long long>(state_), has_spare_ ? 1 : 0,
                  static_cast<unsigned long long>(spare_bits));
    return buf;
}

Rng Rng::deserialize(const std::string& text) {
    unsigned long long state = 0, spare_bits = 0;
    int has_spare = 0;
    if (std::sscanf(text.c_str(), "%llx:%d:%llx", &state, &has_spare, &spare_bits) != 3)
        throw DataError("Rng::deserialize: malformed state '" + text + "'");
    Rng rng;
    rng.state_ = state;
    rng.has_spare_ = has_spare != 0;
    std::uint64_t bits = spare_bits;
    __builtin_memcpy(&rng.spare_, &bits, sizeof(bits));
    return rng;
}

}  // namespace acn
