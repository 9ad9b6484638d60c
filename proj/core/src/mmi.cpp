// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/mmi.hpp"

#include <cmath>

#include "acn/error.hpp"
#include "acn/tensor.hpp"

namespace acn {

using ad::Node;
using ad::Var;
using i64 = std::int64_t;

std::vector<double> level_weights(int levels) {
    if (levels < 1) throw ConfigError("level_weights: levels must be >= 1");
    std::vector<double> g(static_cast<std::size_t>(levels));
    const double denom = double(levels) * double(levels + 1) / 2.0;
    for (int k = 0; k < levels; ++k) g[std::size_t(k)] = double(k + 1) / denom;
    return g;
}

void validate_level_weights(const std::vector<double>& gamma) {
    if (gamma.empty()) throw ConfigError("level weights: empty");
    double sum = 0.0;
    for (std::size_t k = 0; k < gamma.size(); ++k) {
        if (gamma[k] < 0.0) throw ConfigError("level weights: must be nonnegative");
        if (k > 0 && !(gamma[k] > gamma[k - 1]))
            throw ConfigError("level weights: must be strictly increasing");
        sum += gamma[k];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("level weights: must sum to 1");
}

void FeaturePairSet::validate() const {
    if (multi.empty() || multi.size() != uni.size())
        throw ConfigError("FeaturePairSet: need K >= 1 aligned pairs");
    for (std::size_t k = 0; k < multi.size(); ++k)
        if (!multi[k].value().same_shape(uni[k].value()))
            throw ConfigError("FeaturePairSet: shape mismatch at level " + std::to_string(k) + ": " +
                              multi[k].value().shape_str() + " vs " + uni[k].value().shape_str());
}

Var neg_log_q(const Var& m, const Var& mu, const Var& sigma) {
    const Tensor& mv = m.value();
    const Tensor& uv = mu.value();
    const Tensor& sv = sigma.value();
    if (!mv.same_shape(uv))
        throw ConfigError("neg_log_q: m and mu shapes differ: " + mv.shape_str() + " vs " + uv.shape_str());
    if (mv.rank() < 3) throw ConfigError("neg_log_q: expected [B, C, spatial...]");
    const i64 B = mv.dim(0), C = mv.dim(1), S = mv.numel_from(2);
    if (sv.rank() != 1 || sv.dim(0) != C)
        throw ConfigError("neg_log_q: sigma must have one entry per channel");
    for (i64 c = 0; c < C; ++c)
        if (!(sv[c] > 0.0)) throw ConfigError("neg_log_q: sigma must be positive");

    double acc = 0.0;
    for (i64 b = 0; b < B; ++b)
        for (i64 c = 0; c < C; ++c) {
            const double s = sv[c];
            const double log_s = std::log(s);
            const double inv_2s2 = 1.0 / (2.0 * s * s);
            const double* mp = mv.data() + (b * C + c) * S;
            const double* up = uv.data() + (b * C + c) * S;
            double e = 0.0;
            for (i64 i = 0; i < S; ++i) {
                const double r = mp[i] - up[i];
                e += r * r;
            }
            acc += double(S) * log_s + e * inv_2s2;
        }
    Tensor y({1});
    y[0] = acc / double(B);

    auto bwd = [B, C, S](Node& self) {
        Node& mn = *self.parents[0];
        Node& un = *self.parents[1];
        Node& sn = *self.parents[2];
        const double g = self.grad[0] / double(B);
        if (mn.requires_grad) ad::ensure_grad(mn);
        if (un.requires_grad) ad::ensure_grad(un);
        if (sn.requires_grad) ad::ensure_grad(sn);
        for (i64 b = 0; b < B; ++b)
            for (i64 c = 0; c < C; ++c) {
                const double s = sn.value[c];
                const double inv_s2 = 1.0 / (s * s);
                const double* mp = mn.value.data() + (b * C + c) * S;
                const double* up = un.value.data() + (b * C + c) * S;
                double sum_r2 = 0.0;
                for (i64 i = 0; i < S; ++i) {
                    const double r = mp[i] - up[i];
                    sum_r2 += r * r;
                    if (mn.requires_grad) mn.grad[(b * C + c) * S + i] += g * r * inv_s2;
                    if (un.requires_grad) un.grad[(b * C + c) * S + i] -= g * r * inv_s2;
                }
                if (sn.requires_grad)
                    sn.grad[c] += g * (double(S) / s - sum_r2 * inv_s2 / s);
            }
    };
    return ad::make_op(std::move(y), {m, mu, sigma}, std::move(bwd));
}

VariationalHead::VariationalHead(int channels, int spatial_rank, std::uint64_t seed, double leaky_slope)
    : channels_(channels), leaky_slope_(leaky_slope) {
    if (channels < 1) throw ConfigError("VariationalHead: channels must be >= 1");
    if (spatial_rank != 2 && spatial_rank != 3)
        throw ConfigError("VariationalHead: spatial_rank must be 2 or 3");
    Rng rng(seed);
    std::vector<i64> wshape = {channels, channels};
    for (int a = 0; a < spatial_rank; ++a) wshape.push_back(1);
    for (int l = 0; l < 3; ++l) {
        Tensor w = l == 2 ? Tensor(wshape)
                          : Tensor::randn(wshape, rng, 0.0, std::sqrt(2.0 / double(channels)));
        ws_.push_back(ad::parameter(std::move(w)));
        bs_.push_back(ad::parameter(Tensor({channels})));
        params_.push_back(ws_.back());
        names_.push_back("mu" + std::to_string(l) + ".w");
        params_.push_back(bs_.back());
        names_.push_back("mu" + std::to_string(l) + ".b");
    }
    // softplus(rho) = 1  =>  rho = log(e - 1)
    rho_ = ad::parameter(Tensor::full({channels}, std::log(std::exp(1.0) - 1.0)));
    params_.push_back(rho_);
    names_.push_back("rho");
}

Var VariationalHead::mean(const Var& u) const {
    const Tensor& x = u.value();
    if (x.rank() < 3 || x.dim(1) != channels_)
        throw ConfigError("VariationalHead::mean: input " + x.shape_str() + " does not match " +
                          std::to_string(channels_) + " channels");
    Var h = ad::leaky_relu(ad::conv(u, ws_[0], bs_[0], 1, 0), leaky_slope_);
    h = ad::leaky_relu(ad::conv(h, ws_[1], bs_[1], 1, 0), leaky_slope_);
    return ad::conv(h, ws_[2], bs_[2], 1, 0);
}

Var VariationalHead::sigma() const { return ad::softplus(rho_); }

MmiModule::MmiModule(const std::vector<int>& level_channels_in, int spatial_rank, std::uint64_t seed) {
    if (level_channels_in.empty()) throw ConfigError("MmiModule: need at least one level");
    Rng seeder(seed);
    for (std::size_t k = 0; k < level_channels_in.size(); ++k)
        heads_.emplace_back(level_channels_in[k], spatial_rank, seeder.derive(k + 1));
    gamma_ = level_weights(int(level_channels_in.size()));
}

Var MmiModule::loss(const FeaturePairSet& pairs, bool detach_multi) const {
    return loss(pairs, gamma_, detach_multi);
}

Var MmiModule::loss(const FeaturePairSet& pairs, const std::vector<double>& gamma,
                    bool detach_multi) const {
    pairs.validate();
    if (pairs.size() != heads_.size() || gamma.size() != heads_.size())
        throw ConfigError("MmiModule::loss: level count mismatch (pairs " + std::to_string(pairs.size()) +
                          ", heads " + std::to_string(heads_.size()) + ")");
    std::vector<Var> terms;
    for (std::size_t k = 0; k < heads_.size(); ++k) {
        Var target = detach_multi ? pairs.multi[k].detach() : pairs.multi[k];
        terms.push_back(neg_log_q(target, heads_[k].mean(pairs.uni[k]), heads_[k].sigma()));
    }
    return ad::affine_sum(terms, gamma);
}

std::vector<Var> MmiModule::parameters() const {
    std::vector<Var> out;
    for (const auto& h : heads_)
        for (const auto& p : h.parameters()) out.push_back(p);
    return out;
}

std::vector<std::string> MmiModule::parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < heads_.size(); ++k)
        for (const auto& n : heads_[k].parameter_names())
            out.push_back("level" + std::to_string(k) + "." + n);
    return out;
}

std::uint64_t MmiModule::checksum() const {
    std::vector<const Tensor*> ts;
    for (const auto& h : heads_)
        for (const auto& p : h.parameters()) ts.push_back(&p.value());
    return tensors_checksum(ts);
}

}  // namespace acn
