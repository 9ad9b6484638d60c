// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/hash.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "acn/error.hpp"

namespace acn {

std::string Fnv1a::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h_));
    return buf;
}

std::string hash_hex(const std::string& content) {
    Fnv1a h;
    h.update(content);
    return h.hex();
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read file for hashing: " + path);
    Fnv1a h;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) h.update(buf, std::size_t(in.gcount()));
    return h.hex();
}

std::string hash_artifact(const std::string& root, std::vector<std::string> rel_paths) {
    std::sort(rel_paths.begin(), rel_paths.end());
    Fnv1a h;
    for (const auto& rel : rel_paths) {
        std::ifstream in(root + "/" + rel, std::ios::binary);
        if (!in) throw DataError("artifact hash: cannot read " + root + "/" + rel);
        h.update(rel);
        char buf[1 << 16];
        while (in.read(buf, sizeof(buf)) || in.gcount() > 0) h.update(buf, std::size_t(in.gcount()));
    }
    return h.hex();
}

}  // namespace acn
