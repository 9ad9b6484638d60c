// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acn/random.hpp"

namespace acn {

/// Dense row-major double tensor. Network activations use the layout
/// [batch, channels, spatial...], with spatial rank 2 (H, W) or 3 (D, H, W).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape);
    Tensor(std::vector<std::int64_t> shape, double fill);

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::int64_t> shape, double v) { return Tensor(std::move(shape), v); }
    static Tensor from_data(std::vector<std::int64_t> shape, std::vector<double> data);
    static Tensor randn(std::vector<std::int64_t> shape, Rng& rng, double mean = 0.0, double stddev = 1.0);

    bool defined() const { return !shape_.empty() || !data_.empty(); }
    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return int(shape_.size()); }
    std::int64_t dim(int i) const { return shape_[std::size_t(i)]; }
    std::int64_t numel() const { return std::int64_t(data_.size()); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::int64_t i) { return data_[std::size_t(i)]; }
    double operator[](std::int64_t i) const { return data_[std::size_t(i)]; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    void fill(double v);
    void zero() { fill(0.0); }

    /// Number of elements in dims [from, rank).
    std::int64_t numel_from(int from) const;

    Tensor reshaped(std::vector<std::int64_t> new_shape) const;

    bool all_finite() const;
    double min() const;
    double max() const;
    double sum() const;
    double mean() const { return numel() > 0 ? sum() / double(numel()) : 0.0; }

    std::string shape_str() const;

private:
    std::vector<std::int64_t> shape_;
    std::vector<double> data_;
};

/// FNV-1a checksum of the raw bytes of a tensor list; bitwise-sensitive.
std::uint64_t tensors_checksum(const std::vector<const Tensor*>& tensors);

}  // namespace acn
