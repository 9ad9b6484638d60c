// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace acn {

/// Binary mask over a 2-d or 3-d grid with physical voxel spacing (mm),
/// spacing[i] aligned with shape[i].
struct BinaryMask {
    std::vector<std::int64_t> shape;
    std::vector<double> spacing;
    std::vector<std::uint8_t> voxels;  // row-major, 0/1

    static BinaryMask zeros(std::vector<std::int64_t> shape, std::vector<double> spacing = {});
    std::int64_t numel() const;
    std::int64_t count() const;
    void validate() const;
};

/// Dice similarity coefficient 2|a n b| / (|a| + |b|); 1.0 when both empty.
double dsc(const BinaryMask& a, const BinaryMask& b);

struct Hd95Result {
    double mm = 0.0;
    /// True when one mask was empty and the grid-diagonal sentinel was used.
    bool sentinel = false;
};

/// Symmetric 95th-percentile surface distance in mm. Surface voxels are mask
/// voxels with a face-adjacent background neighbour (the outside of the grid
/// counts as background). Directed distances take the 95th percentile with
/// linear interpolation; the result is the max of the two directions.
/// One empty mask -> sentinel = physical grid diagonal; both empty -> 0.
Hd95Result hd95(const BinaryMask& a, const BinaryMask& b);

/// Surface voxel linear indices under the face-adjacency rule.
std::vector<std::int64_t> surface_voxels(const BinaryMask& m);

/// Percentile in [0,1] with linear interpolation over the sorted values.
double percentile_interpolated(std::vector<double> values, double fraction);

}  // namespace acn
