// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "acn/error.hpp"

namespace acn {

void pgm_write(const std::string& path, std::int64_t height, std::int64_t width,
               const std::vector<std::uint8_t>& pixels) {
    if (height < 1 || width < 1 || std::int64_t(pixels.size()) != height * width)
        throw ConfigError("pgm_write: bad dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("pgm_write: cannot write " + path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), std::streamsize(pixels.size()));
    if (!out) throw DataError("pgm_write: write failed for " + path);
}

std::vector<std::uint8_t> scale_to_u8(const std::vector<double>& values, double lo, double hi) {
    if (!(hi > lo)) throw ConfigError("scale_to_u8: hi must exceed lo");
    std::vector<std::uint8_t> out(values.size());
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = (values[i] - lo) * scale;
        out[i] = std::uint8_t(std::clamp(v, 0.0, 255.0) + 0.5);
    }
    return out;
}

}  // namespace acn
