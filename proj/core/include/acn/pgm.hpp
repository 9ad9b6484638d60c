// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace acn {

/// 8-bit binary PGM (P5) grayscale image writer.
void pgm_write(const std::string& path, std::int64_t height, std::int64_t width,
               const std::vector<std::uint8_t>& pixels);

/// Scales values linearly from [lo, hi] to [0, 255] with clamping.
std::vector<std::uint8_t> scale_to_u8(const std::vector<double>& values, double lo, double hi);

}  // namespace acn
