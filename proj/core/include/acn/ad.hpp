// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense double tensors,
// with the network operators needed by the segmentation paths, the
// discriminators and the variational transfer heads. Single-threaded and
// bitwise deterministic.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "acn/tensor.hpp"

namespace acn::ad {

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // accumulates into parents' grads
};

/// Handle to a node in the compute graph. Copy = alias.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    bool defined() const { return n_ != nullptr; }
    const Tensor& value() const { return n_->value; }
    Tensor& mutable_value() { return n_->value; }
    const Tensor& grad() const { return n_->grad; }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    const std::shared_ptr<Node>& node() const { return n_; }

    /// Same value, cut off from the graph.
    Var detach() const;

private:
    std::shared_ptr<Node> n_;
};

/// Trainable leaf.
Var parameter(Tensor value);
/// Non-trainable leaf (inputs, targets).
Var constant(Tensor value);
Var leaf(Tensor value, bool requires_grad);

/// Builds an op node. When gradients are globally disabled or no parent
/// requires them, the result is a detached constant and `backward` is
/// dropped. Custom fused ops (the losses) are built through this too.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

bool grad_enabled();
/// RAII switch: forwards built under the guard produce detached constants.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

/// Backpropagate from a scalar root. Gradients accumulate (+=) into every
/// reachable node that requires them; parameters keep their buffers across
/// calls until zero_grad.
void backward(const Var& root);
void ensure_grad(Node& n);
void zero_grad(const std::vector<Var>& params);

// ---- operators -----------------------------------------------------------

/// N-d convolution, spatial rank 2 or 3. x: [B, Cin, S...], w: [Cout, Cin, K...],
/// b: [Cout]. Same stride and zero padding on every spatial axis.
Var conv(const Var& x, const Var& w, const Var& b, std::int64_t stride, std::int64_t pad);

/// Instance normalization with per-channel affine. Statistics over spatial
/// dims of each (batch, channel) slice; no running state, so training and
/// inference behave identically.
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var leaky_relu(const Var& x, double negative_slope);

/// Per-position softmax over the channel dim with temperature tau.
Var softmax_channels(const Var& x, double tau = 1.0);

/// 2x max pooling on every spatial axis (input spatial dims must be even).
Var max_pool2(const Var& x);

/// Nearest-neighbour 2x upsampling on every spatial axis.
Var upsample_nearest2(const Var& x);

Var concat_channels(const Var& a, const Var& b);

/// [B, C, S...] -> [B, C] spatial mean.
Var global_avg_pool(const Var& x);

/// x: [B, Cin], w: [Cout, Cin], b: [Cout] -> [B, Cout].
Var linear(const Var& x, const Var& w, const Var& b);

Var softplus(const Var& x);

/// Sum over the channel dim: [B, C, S...] -> [B, 1, S...].
Var channel_sum(const Var& x);

Var add(const Var& a, const Var& b);
Var scale(const Var& x, double c);
Var sum(const Var& x);   // -> shape [1]
Var mean(const Var& x);  // -> shape [1]

/// c0 + sum_i coeff_i * x_i over scalar Vars; used to assemble weighted
/// objectives while keeping each term's coefficient explicit.
Var affine_sum(const std::vector<Var>& xs, const std::vector<double>& coeffs, double c0 = 0.0);

}  // namespace acn::ad
