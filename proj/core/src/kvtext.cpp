// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/kvtext.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "acn/error.hpp"

namespace acn {

namespace {
std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
            return false;
    }
    return k.front() != '.' && k.back() != '.';
}
}  // namespace

void KvDoc::set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) throw ConfigError("kv: invalid key '" + key + "'");
    if (value.find('\n') != std::string::npos) throw ConfigError("kv: value for '" + key + "' contains newline");
    entries_[key] = value;
}

void KvDoc::set_int(const std::string& key, std::int64_t v) { set(key, std::to_string(v)); }

void KvDoc::set_double(const std::string& key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    set(key, buf);
}

void KvDoc::set_bool(const std::string& key, bool v) { set(key, v ? "true" : "false"); }

const std::string& KvDoc::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("kv: missing key '" + key + "'");
    return it->second;
}

std::string KvDoc::get_or(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

std::int64_t KvDoc::get_int(const std::string& key) const {
    const std::string& s = get(key);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end == s.c_str() || *end != '\0')
        throw ConfigError("kv: key '" + key + "' is not an integer: '" + s + "'");
    return v;
}

std::int64_t KvDoc::get_int_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double KvDoc::get_double(const std::string& key) const {
    const std::string& s = get(key);
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end == s.c_str() || *end != '\0')
        throw ConfigError("kv: key '" + key + "' is not a number: '" + s + "'");
    return v;
}

double KvDoc::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool KvDoc::get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("kv: key '" + key + "' is not a boolean: '" + s + "'");
}

bool KvDoc::get_bool_or(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<std::string> KvDoc::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.push_back(it->first);
    }
    return out;
}

std::string KvDoc::serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
    return os.str();
}

KvDoc KvDoc::parse(const std::string& text) {
    KvDoc doc;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("kv: line " + std::to_string(lineno) + " has no '=': '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (!valid_key(key))
            throw ConfigError("kv: line " + std::to_string(lineno) + " has invalid key '" + key + "'");
        if (doc.entries_.count(key) != 0)
            throw ConfigError("kv: duplicate key '" + key + "' at line " + std::to_string(lineno));
        doc.entries_[key] = value;
    }
    return doc;
}

KvDoc KvDoc::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("kv: cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str());
}

void KvDoc::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("kv: cannot write " + path);
    out << serialize();
    if (!out) throw DataError("kv: write failed for " + path);
}

}  // namespace acn
