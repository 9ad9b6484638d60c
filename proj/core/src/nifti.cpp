// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <memory>
#include <vector>

#include "acn/error.hpp"

namespace acn {

namespace {

// NIfTI-1 header, 348 bytes. Only the fields we touch are named; the rest
// ride along as padding so offsets stay exact.
#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;     // 0: must be 348
    char pad0[36];               // 4
    std::int16_t dim[8];         // 40
    char pad1[14];               // 56
    std::int16_t datatype;       // 70
    std::int16_t bitpix;         // 72
    std::int16_t slice_start;    // 74
    float pixdim[8];             // 76
    float vox_offset;            // 108
    float scl_slope;             // 112
    float scl_inter;             // 116
    char pad2[224];              // 120
    char magic[4];               // 344: "n+1\0"
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;
constexpr std::int16_t kDtUint16 = 512;

struct GzCloser {
    void operator()(gzFile f) const {
        if (f) gzclose(f);
    }
};
using GzPtr = std::unique_ptr<gzFile_s, GzCloser>;

void gz_read_exact(gzFile f, void* dst, std::size_t n, const std::string& path) {
    std::size_t done = 0;
    auto* p = static_cast<char*>(dst);
    while (done < n) {
        unsigned chunk = unsigned(std::min<std::size_t>(n - done, 1u << 30));
        int got = gzread(f, p + done, chunk);
        if (got <= 0) throw DataError("nifti: truncated file " + path);
        done += std::size_t(got);
    }
}

void gz_write_exact(gzFile f, const void* src, std::size_t n, const std::string& path) {
    if (gzwrite(f, src, unsigned(n)) != int(n)) throw DataError("nifti: write failed for " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

NiftiVolume nifti_read(const std::string& path) {
    GzPtr f(gzopen(path.c_str(), "rb"));
    if (!f) throw DataError("nifti: cannot open " + path);

    Nifti1Header hdr{};
    gz_read_exact(f.get(), &hdr, sizeof(hdr), path);
    if (hdr.sizeof_hdr != 348) {
        if (hdr.sizeof_hdr == 0x5c010000)
            throw DataError("nifti: big-endian file not supported: " + path);
        throw DataError("nifti: bad header size in " + path);
    }
    if (std::strncmp(hdr.magic, "n+1", 3) != 0)
        throw DataError("nifti: only single-file (n+1) volumes supported: " + path);

    const int rank = hdr.dim[0];
    if (rank < 2 || rank > 3)
        throw DataError("nifti: unsupported rank " + std::to_string(rank) + " in " + path);

    NiftiVolume vol;
    std::int64_t n = 1;
    for (int a = rank; a >= 1; --a) {  // reverse so x lands in the last dim
        std::int64_t d = hdr.dim[a];
        if (d < 1) throw DataError("nifti: bad dimension in " + path);
        vol.shape.push_back(d);
        double sp = hdr.pixdim[a];
        vol.spacing.push_back(sp > 0.0f ? sp : 1.0);
        n *= d;
    }
    vol.data.resize(std::size_t(n));

    // Skip to the voxel data.
    std::int64_t offset = std::int64_t(hdr.vox_offset);
    if (offset < std::int64_t(sizeof(hdr))) throw DataError("nifti: bad vox_offset in " + path);
    std::vector<char> skip(std::size_t(offset - std::int64_t(sizeof(hdr))));
    if (!skip.empty()) gz_read_exact(f.get(), skip.data(), skip.size(), path);

    const double slope = (hdr.scl_slope == 0.0f) ? 1.0 : double(hdr.scl_slope);
    const double inter = (hdr.scl_slope == 0.0f) ? 0.0 : double(hdr.scl_inter);

    auto load = [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> raw(static_cast<std::size_t>(n));
        gz_read_exact(f.get(), raw.data(), raw.size() * sizeof(T), path);
        for (std::int64_t i = 0; i < n; ++i)
            vol.data[std::size_t(i)] = slope * double(raw[std::size_t(i)]) + inter;
    };
    switch (hdr.datatype) {
        case kDtUint8: load(std::uint8_t{}); break;
        case kDtInt16: load(std::int16_t{}); break;
        case kDtUint16: load(std::uint16_t{}); break;
        case kDtInt32: load(std::int32_t{}); break;
        case kDtFloat32: load(float{}); break;
        case kDtFloat64: load(double{}); break;
        default:
            throw DataError("nifti: unsupported datatype " + std::to_string(hdr.datatype) + " in " + path);
    }
    return vol;
}

void nifti_write(const std::string& path, const NiftiVolume& vol, NiftiDtype dtype) {
    const int rank = int(vol.shape.size());
    if (rank < 2 || rank > 3) throw ConfigError("nifti_write: rank must be 2 or 3");
    if (vol.spacing.size() != vol.shape.size()) throw ConfigError("nifti_write: spacing rank mismatch");

    Nifti1Header hdr{};
    hdr.sizeof_hdr = 348;
    hdr.dim[0] = std::int16_t(rank);
    std::int64_t n = 1;
    for (int a = 0; a < rank; ++a) {
        std::int64_t d = vol.shape[std::size_t(rank - 1 - a)];
        if (d < 1 || d > 32767) throw ConfigError("nifti_write: dimension out of range");
        hdr.dim[a + 1] = std::int16_t(d);
        hdr.pixdim[a + 1] = float(vol.spacing[std::size_t(rank - 1 - a)]);
        n *= d;
    }
    for (int a = rank; a < 7; ++a) hdr.dim[a + 1] = 1;
    if (std::int64_t(vol.data.size()) != n) throw ConfigError("nifti_write: data size mismatch");
    hdr.datatype = dtype == NiftiDtype::Float32 ? kDtFloat32 : kDtUint8;
    hdr.bitpix = dtype == NiftiDtype::Float32 ? 32 : 8;
    hdr.pixdim[0] = 1.0f;
    hdr.vox_offset = 352.0f;
    hdr.scl_slope = 1.0f;
    hdr.scl_inter = 0.0f;
    std::memcpy(hdr.magic, "n+1", 4);

    const char* mode = ends_with(path, ".gz") ? "wb" : "wbT";  // T: store uncompressed
    GzPtr f(gzopen(path.c_str(), mode));
    if (!f) throw DataError("nifti: cannot write " + path);
    gz_write_exact(f.get(), &hdr, sizeof(hdr), path);
    const char ext[4] = {0, 0, 0, 0};
    gz_write_exact(f.get(), ext, 4, path);

    if (dtype == NiftiDtype::Float32) {
        std::vector<float> raw(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) raw[std::size_t(i)] = float(vol.data[std::size_t(i)]);
        gz_write_exact(f.get(), raw.data(), raw.size() * sizeof(float), path);
    } else {
        std::vector<std::uint8_t> raw(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            double v = vol.data[std::size_t(i)];
            if (v < 0.0 || v > 255.0) throw ConfigError("nifti_write: value out of uint8 range");
            raw[std::size_t(i)] = std::uint8_t(v + 0.5);
        }
        gz_write_exact(f.get(), raw.data(), raw.size(), path);
    }
}

}  // namespace acn
