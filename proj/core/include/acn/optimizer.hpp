// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "acn/ad.hpp"

namespace acn {

/// Adam with bias correction, defaults (0.9, 0.999, 1e-8). One instance per
/// model component; state serializes for bitwise-exact training resumption.
class Adam {
public:
    explicit Adam(std::vector<ad::Var> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    /// Applies one update from the parameters' accumulated gradients.
    void step(double lr);
    void zero_grad() { ad::zero_grad(params_); }

    const std::vector<ad::Var>& params() const { return params_; }
    std::int64_t steps_taken() const { return t_; }

    void serialize(std::ostream& os) const;
    /// Restores moments and step count; parameter layout must match.
    void deserialize(std::istream& is);

private:
    std::vector<ad::Var> params_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

/// Raw little-endian tensor blob IO with shape headers and a magic tag;
/// round-trips bitwise. On mismatch the reader throws DataError naming
/// `component`.
void write_tensors(std::ostream& os, const std::vector<const Tensor*>& tensors);
void read_tensors_into(std::istream& is, const std::vector<Tensor*>& tensors,
                       const std::string& component);

}  // namespace acn
