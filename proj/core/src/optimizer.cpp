// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/optimizer.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "acn/error.hpp"

namespace acn {

using i64 = std::int64_t;

Adam::Adam(std::vector<ad::Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (params_.empty()) throw ConfigError("Adam: no parameters");
    for (const auto& p : params_) {
        m_.emplace_back(p.value().shape());
        v_.emplace_back(p.value().shape());
    }
}

void Adam::step(double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("Adam: bad learning rate");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& node = *params_[pi].node();
        ad::ensure_grad(node);
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        const i64 n = node.value.numel();
        for (i64 i = 0; i < n; ++i) {
            const double g = node.grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            node.value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {
constexpr char kMagic[4] = {'A', 'C', 'N', 'B'};
constexpr std::uint32_t kVersion = 1;

void write_raw(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
}

void read_raw(std::istream& is, void* p, std::size_t n, const std::string& component) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    if (is.gcount() != std::streamsize(n))
        throw DataError("checkpoint component '" + component + "' is truncated or corrupt");
}
}  // namespace

void write_tensors(std::ostream& os, const std::vector<const Tensor*>& tensors) {
    write_raw(os, kMagic, 4);
    write_raw(os, &kVersion, sizeof(kVersion));
    std::uint64_t count = tensors.size();
    write_raw(os, &count, sizeof(count));
    for (const auto* t : tensors) {
        std::uint32_t rank = std::uint32_t(t->rank());
        write_raw(os, &rank, sizeof(rank));
        for (auto d : t->shape()) {
            std::int64_t d64 = d;
            write_raw(os, &d64, sizeof(d64));
        }
        write_raw(os, t->data(), std::size_t(t->numel()) * sizeof(double));
    }
}

void read_tensors_into(std::istream& is, const std::vector<Tensor*>& tensors,
                       const std::string& component) {
    char magic[4];
    read_raw(is, magic, 4, component);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint component '" + component + "' has a bad magic tag");
    std::uint32_t version = 0;
    read_raw(is, &version, sizeof(version), component);
    if (version != kVersion)
        throw DataError("checkpoint component '" + component + "' has unsupported version " +
                        std::to_string(version));
    std::uint64_t count = 0;
    read_raw(is, &count, sizeof(count), component);
    if (count != tensors.size())
        throw DataError("checkpoint component '" + component + "' holds " + std::to_string(count) +
                        " tensors, expected " + std::to_string(tensors.size()));
    for (auto* t : tensors) {
        std::uint32_t rank = 0;
        read_raw(is, &rank, sizeof(rank), component);
        if (rank != std::uint32_t(t->rank()))
            throw DataError("checkpoint component '" + component + "' has a tensor rank mismatch");
        for (int a = 0; a < t->rank(); ++a) {
            std::int64_t d = 0;
            read_raw(is, &d, sizeof(d), component);
            if (d != t->dim(a))
                throw DataError("checkpoint component '" + component + "' has a tensor shape mismatch");
        }
        read_raw(is, t->data(), std::size_t(t->numel()) * sizeof(double), component);
    }
}

void Adam::serialize(std::ostream& os) const {
    write_raw(os, &t_, sizeof(t_));
    std::vector<const Tensor*> ts;
    for (const auto& m : m_) ts.push_back(&m);
    for (const auto& v : v_) ts.push_back(&v);
    write_tensors(os, ts);
}

void Adam::deserialize(std::istream& is) {
    read_raw(is, &t_, sizeof(t_), "optimizer");
    std::vector<Tensor*> ts;
    for (auto& m : m_) ts.push_back(&m);
    for (auto& v : v_) ts.push_back(&v);
    read_tensors_into(is, ts, "optimizer");
}

}  // namespace acn
