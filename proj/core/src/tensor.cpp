// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "acn/error.hpp"
#include "acn/hash.hpp"

namespace acn {

namespace {
std::int64_t checked_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw ConfigError("Tensor: negative dimension");
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), data_(std::size_t(checked_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<std::int64_t> shape, double fill)
    : shape_(std::move(shape)), data_(std::size_t(checked_numel(shape_)), fill) {}

Tensor Tensor::from_data(std::vector<std::int64_t> shape, std::vector<double> data) {
    if (checked_numel(shape) != std::int64_t(data.size()))
        throw ConfigError("Tensor::from_data: shape/data size mismatch");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::randn(std::vector<std::int64_t> shape, Rng& rng, double mean, double stddev) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = rng.normal(mean, stddev);
    return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::int64_t Tensor::numel_from(int from) const {
    std::int64_t n = 1;
    for (int i = from; i < rank(); ++i) n *= dim(i);
    return n;
}

Tensor Tensor::reshaped(std::vector<std::int64_t> new_shape) const {
    if (checked_numel(new_shape) != numel())
        throw ConfigError("Tensor::reshaped: element count mismatch");
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Tensor::max() const { return *std::max_element(data_.begin(), data_.end()); }
double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << ']';
    return os.str();
}

std::uint64_t tensors_checksum(const std::vector<const Tensor*>& tensors) {
    Fnv1a h;
    for (const auto* t : tensors) h.update(t->data(), std::size_t(t->numel()) * sizeof(double));
    return h.value();
}

}  // namespace acn
