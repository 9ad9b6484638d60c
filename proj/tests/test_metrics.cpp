// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// DSC and HD95 against independent brute-force oracles.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "acn/error.hpp"
#include "acn/metrics.hpp"
#include "acn/random.hpp"
#include "metric_oracles.hpp"
#include "test_support.hpp"

using namespace acn;

namespace {

using acn::test::dsc_oracle;
using acn::test::hd95_oracle;
using acn::test::random_mask;

BinaryMask mask_from(std::vector<std::int64_t> shape, std::vector<std::uint8_t> v,
                     std::vector<double> spacing = {}) {
    BinaryMask m = BinaryMask::zeros(std::move(shape), std::move(spacing));
    m.voxels = std::move(v);
    m.validate();
    return m;
}

}  // namespace

TEST_CASE("dsc basics") {
    BinaryMask a = mask_from({2, 2}, {1, 1, 0, 0});
    BinaryMask b = mask_from({2, 2}, {1, 0, 1, 0});
    CHECK(dsc(a, a) == 1.0);                                   // identical, nonempty
    CHECK(dsc(a, b) == 0.5);                                   // |a|=|b|=2, overlap 1
    CHECK(dsc(mask_from({2, 2}, {1, 0, 0, 0}), mask_from({2, 2}, {0, 0, 0, 1})) == 0.0);  // disjoint
    CHECK(dsc(mask_from({2, 2}, {0, 0, 0, 0}), mask_from({2, 2}, {0, 0, 0, 0})) == 1.0);  // both empty
    CHECK(dsc(a, b) == dsc(b, a));
    CHECK_THROWS_AS(dsc(a, mask_from({4}, {0, 0, 0, 0})), ConfigError);
}

TEST_CASE("dsc joint permutation invariance") {
    Rng rng(3);
    BinaryMask a = random_mask({4, 4}, rng), b = random_mask({4, 4}, rng);
    double before = dsc(a, b);
    // Jointly reverse the voxel order of both masks.
    std::reverse(a.voxels.begin(), a.voxels.end());
    std::reverse(b.voxels.begin(), b.voxels.end());
    CHECK(dsc(a, b) == before);
}

TEST_CASE("hd95 basics") {
    BinaryMask a = BinaryMask::zeros({4, 4});
    a.voxels[5] = 1;
    BinaryMask b = BinaryMask::zeros({4, 4});
    b.voxels[6] = 1;  // one voxel to the right
    CHECK(hd95(a, a).mm == 0.0);
    CHECK(test::close(hd95(a, b).mm, 1.0, 1e-12, 1e-12));
    CHECK_FALSE(hd95(a, b).sentinel);

    // One empty: grid-diagonal sentinel, flagged.
    BinaryMask empty = BinaryMask::zeros({4, 4});
    Hd95Result r = hd95(a, empty);
    CHECK(r.sentinel);
    CHECK(test::close(r.mm, std::sqrt(32.0), 1e-12, 1e-12));
    CHECK_FALSE(hd95(empty, empty).sentinel);
    CHECK(hd95(empty, empty).mm == 0.0);
}

TEST_CASE("hd95 respects spacing and scales linearly with it") {
    Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        BinaryMask a = random_mask({8, 8}, rng, {1.0, 1.0});
        BinaryMask b = random_mask({8, 8}, rng, {1.0, 1.0});
        if (a.count() == 0 || b.count() == 0) continue;
        double base = hd95(a, b).mm;
        BinaryMask a2 = a, b2 = b;
        a2.spacing = {2.0, 2.0};
        b2.spacing = {2.0, 2.0};
        CHECK(test::close(hd95(a2, b2).mm, 2.0 * base, 1e-12, 1e-12));
    }
    BinaryMask a = random_mask({8, 8}, rng, {1.0, 1.0});
    BinaryMask b = random_mask({8, 8}, rng, {2.0, 2.0});
    CHECK_THROWS_AS(hd95(a, b), ConfigError);
}

TEST_CASE("hd95 symmetry and anisotropic spacing against the oracle") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        BinaryMask a = random_mask({6, 9}, rng, {0.7, 1.3});
        BinaryMask b = random_mask({6, 9}, rng, {0.7, 1.3});
        Hd95Result ab = hd95(a, b), ba = hd95(b, a);
        CHECK(ab.mm == ba.mm);
        CHECK(test::close(ab.mm, hd95_oracle(a, b), 1e-9, 1e-12));
    }
}

TEST_CASE("percentile interpolation matches the linear rule") {
    // Sorted distances 0..9: rank = 0.95 * 9 = 8.55 -> 8.55
    CHECK(test::close(percentile_interpolated({9, 8, 7, 6, 5, 4, 3, 2, 1, 0}, 0.95), 8.55, 1e-12, 1e-12));
    CHECK(percentile_interpolated({4.0}, 0.95) == 4.0);
}

TEST_CASE("random 3d masks match brute-force oracles") {
    Rng rng(11);
    int nontrivial = 0;
    for (int rep = 0; rep < 25; ++rep) {
        BinaryMask a = random_mask({8, 8, 8}, rng);
        BinaryMask b = random_mask({8, 8, 8}, rng);
        CHECK(dsc(a, b) == dsc_oracle(a, b));
        Hd95Result h = hd95(a, b);
        CHECK(test::close(h.mm, hd95_oracle(a, b), 1e-9, 1e-12));
        if (a.count() && b.count()) ++nontrivial;
    }
    CHECK(nontrivial > 5);  // the sample actually exercised the surface path
}
