// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace acn {

/// Hierarchical key-value text document: one `dotted.key = value` per line,
/// `#` comments and blank lines ignored. Keys are unique; serialization is
/// key-sorted so a document has exactly one canonical rendering (hashable).
///
///   dataset.seed = 17
///   dataset.case.0000.id = case_0000
class KvDoc {
public:
    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, std::int64_t v);
    void set_double(const std::string& key, double v);  // round-trips bitwise
    void set_bool(const std::string& key, bool v);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    /// Getters throw ConfigError when the key is absent or malformed.
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool_or(const std::string& key, bool fallback) const;

    void erase(const std::string& key) { entries_.erase(key); }
    /// Keys beginning with `prefix`, sorted.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

    std::string serialize() const;
    static KvDoc parse(const std::string& text);
    static KvDoc load(const std::string& path);
    void save(const std::string& path) const;

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace acn
