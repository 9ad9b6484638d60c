// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace acn {

/// A single NIfTI-1 volume in row-major order (x fastest on disk maps to the
/// last dim here): shape [Y, X] or [Z, Y, X], spacing aligned with shape.
struct NiftiVolume {
    std::vector<std::int64_t> shape;
    std::vector<double> spacing;
    std::vector<double> data;
};

/// Reads .nii or .nii.gz (detected by content). Supports the common scalar
/// datatypes (uint8/int16/uint16/int32/float32/float64) with scl_slope /
/// scl_inter applied. Little-endian files only.
NiftiVolume nifti_read(const std::string& path);

enum class NiftiDtype { Float32, Uint8 };

/// Writes a .nii (or .nii.gz when the name ends in .gz) single-file volume.
void nifti_write(const std::string& path, const NiftiVolume& vol, NiftiDtype dtype);

}  // namespace acn
