// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace acn {

/// Incremental FNV-1a 64-bit content hash. Used for config hashes,
/// parameter checksums and artifact hashes; rendered as 16 hex chars.
class Fnv1a {
public:
    Fnv1a& update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& update(const std::string& s) { return update(s.data(), s.size()); }
    Fnv1a& update(const std::vector<double>& v) { return update(v.data(), v.size() * sizeof(double)); }

    std::uint64_t value() const { return h_; }
    std::string hex() const;

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(const std::string& content);

/// Hash of a file's raw bytes. Throws DataError if unreadable.
std::string hash_file(const std::string& path);

/// Deterministic hash over a set of files: sorted relative paths, each
/// mixed in as (path, contents). Paths not found raise DataError.
std::string hash_artifact(const std::string& root, std::vector<std::string> rel_paths);

}  // namespace acn
