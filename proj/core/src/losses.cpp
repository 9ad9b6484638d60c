// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/losses.hpp"

#include <cmath>
#include <sstream>

#include "acn/error.hpp"

namespace acn {

const double kMaxNegLog = -std::log(kProbFloor);

using ad::Node;
using ad::Var;
using i64 = std::int64_t;

void LossWeights::validate() const {
    for (double v : {lambda_multi, lambda_uni, lambda0, lambda1, lambda2, ramp_amplitude})
        if (v < 0.0 || !std::isfinite(v)) throw ConfigError("LossWeights: weights must be nonnegative");
    if (ramp_length < 0) throw ConfigError("LossWeights: ramp_length must be nonnegative");
}

Var soften_logits(const Var& logits, double tau) {
    if (tau <= 0.0) throw ConfigError("soften_logits: temperature must be > 0, got " + std::to_string(tau));
    return ad::softmax_channels(logits, tau);
}

Var consistency_loss(const Var& probs_a, const Var& probs_b) {
    const Tensor& a = probs_a.value();
    const Tensor& b = probs_b.value();
    if (!a.same_shape(b)) throw ConfigError("consistency_loss: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    if (a.rank() < 3) throw ConfigError("consistency_loss: expected [B, C, spatial...]");
    const i64 C = a.dim(1);
    const i64 V = a.dim(0) * a.numel_from(2);  // voxels across the batch
    const i64 n = a.numel();
    const double norm = 1.0 / (double(C) * double(V));

    double acc = 0.0;
    for (i64 i = 0; i < n; ++i) {
        const double pa = a[i], pb = b[i];
        const double la = std::log(std::max(pa, kProbFloor));
        const double lb = std::log(std::max(pb, kProbFloor));
        if (pa > 0.0) acc += pa * (la - lb);
        if (pb > 0.0) acc += pb * (lb - la);
    }
    Tensor y({1});
    y[0] = acc * norm;

    auto bwd = [n, norm](Node& self) {
        Node& an = *self.parents[0];
        Node& bn = *self.parents[1];
        const double g = self.grad[0] * norm;
        if (an.requires_grad) ad::ensure_grad(an);
        if (bn.requires_grad) ad::ensure_grad(bn);
        for (i64 i = 0; i < n; ++i) {
            const double pa = an.value[i], pb = bn.value[i];
            const double fa = std::max(pa, kProbFloor), fb = std::max(pb, kProbFloor);
            const double la = std::log(fa), lb = std::log(fb);
            if (an.requires_grad) {
                double d = (pa > 0.0 ? (la - lb) + (pa >= kProbFloor ? 1.0 : 0.0) : 0.0);
                if (pb > 0.0 && pa >= kProbFloor) d -= pb / fa;
                an.grad[i] += g * d;
            }
            if (bn.requires_grad) {
                double d = (pb > 0.0 ? (lb - la) + (pb >= kProbFloor ? 1.0 : 0.0) : 0.0);
                if (pa > 0.0 && pb >= kProbFloor) d -= pa / fb;
                bn.grad[i] += g * d;
            }
        }
    };
    return ad::make_op(std::move(y), {probs_a, probs_b}, std::move(bwd));
}

SelfInformation self_information(const Var& probs) {
    const Tensor& p = probs.value();
    if (p.rank() < 3) throw ConfigError("self_information: expected [B, C, spatial...]");
    const i64 n = p.numel();
    Tensor y(p.shape());
    for (i64 i = 0; i < n; ++i) {
        const double v = p[i];
        y[i] = v > 0.0 ? -v * std::log(std::max(v, kProbFloor)) : 0.0;
    }
    auto bwd = [n](Node& self) {
        Node& pn = *self.parents[0];
        if (!pn.requires_grad) return;
        ad::ensure_grad(pn);
        for (i64 i = 0; i < n; ++i) {
            const double v = pn.value[i];
            double d;
            if (v >= kProbFloor)
                d = -(std::log(v) + 1.0);
            else if (v > 0.0)
                d = -std::log(kProbFloor);
            else
                d = 0.0;
            pn.grad[i] += self.grad[i] * d;
        }
    };
    SelfInformation out;
    out.channels = ad::make_op(std::move(y), {probs}, std::move(bwd));
    out.scalar = ad::channel_sum(out.channels);
    return out;
}

namespace {

// mean over positions of min(softplus(sign * x), kMaxNegLog); the gradient
// vanishes where the cap is active.
Var capped_softplus_mean(const Var& logits, double sign) {
    const Tensor& x = logits.value();
    const i64 n = x.numel();
    if (n == 0) throw ConfigError("adversarial loss: empty logits");
    double acc = 0.0;
    for (i64 i = 0; i < n; ++i) {
        double v = sign * x[i];
        double sp = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
        acc += std::min(sp, kMaxNegLog);
    }
    Tensor y({1});
    y[0] = acc / double(n);
    auto bwd = [n, sign](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ad::ensure_grad(xn);
        const double g = self.grad[0] / double(n);
        for (i64 i = 0; i < n; ++i) {
            double v = sign * xn.value[i];
            double sp = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
            if (sp >= kMaxNegLog) continue;
            double sig = 1.0 / (1.0 + std::exp(-v));
            xn.grad[i] += g * sign * sig;
        }
    };
    return ad::make_op(std::move(y), {logits}, std::move(bwd));
}

}  // namespace

Var adversarial_d_loss(const Var& real_logits, const Var& fake_logits) {
    // -log D(real) = softplus(-x_real); -log(1 - D(fake)) = softplus(x_fake)
    return ad::add(capped_softplus_mean(real_logits, -1.0), capped_softplus_mean(fake_logits, +1.0));
}

Var adversarial_g_loss(const Var& fake_logits) {
    return capped_softplus_mean(fake_logits, -1.0);
}

Var dice_loss(const Var& probs, const Tensor& target_onehot) {
    const Tensor& p = probs.value();
    if (!p.same_shape(target_onehot))
        throw ConfigError("dice_loss: shape mismatch " + p.shape_str() + " vs " + target_onehot.shape_str());
    if (p.rank() < 3) throw ConfigError("dice_loss: expected [B, C, spatial...]");
    constexpr double kEps = 1e-5;
    const i64 B = p.dim(0), C = p.dim(1), S = p.numel_from(2);
    const i64 c0 = C > 1 ? 1 : 0;  // skip background unless single-channel
    const i64 fg = C - c0;

    // Overlap statistics pooled over the batch, per class.
    std::vector<double> inter(std::size_t(C), 0.0), denom(std::size_t(C), 0.0);
    for (i64 b = 0; b < B; ++b)
        for (i64 c = c0; c < C; ++c) {
            const double* pc = p.data() + (b * C + c) * S;
            const double* tc = target_onehot.data() + (b * C + c) * S;
            double in = 0.0, dn = 0.0;
            for (i64 i = 0; i < S; ++i) {
                in += pc[i] * tc[i];
                dn += pc[i] + tc[i];
            }
            inter[std::size_t(c)] += in;
            denom[std::size_t(c)] += dn;
        }
    double loss = 1.0;
    for (i64 c = c0; c < C; ++c)
        loss -= (2.0 * inter[std::size_t(c)] + kEps) / (denom[std::size_t(c)] + kEps) / double(fg);

    Tensor y({1});
    y[0] = loss;
    auto bwd = [B, C, S, c0, fg, kEps, target = target_onehot, inter = std::move(inter),
                denom = std::move(denom)](Node& self) {
        Node& pn = *self.parents[0];
        if (!pn.requires_grad) return;
        ad::ensure_grad(pn);
        const double g = self.grad[0];
        for (i64 b = 0; b < B; ++b)
            for (i64 c = c0; c < C; ++c) {
                const double num = 2.0 * inter[std::size_t(c)] + kEps;
                const double den = denom[std::size_t(c)] + kEps;
                const double* tc = target.data() + (b * C + c) * S;
                double* dp = pn.grad.data() + (b * C + c) * S;
                const double scale = g / double(fg);
                for (i64 i = 0; i < S; ++i)
                    dp[i] -= scale * (2.0 * tc[i] * den - num) / (den * den);
            }
    };
    return ad::make_op(std::move(y), {probs}, std::move(bwd));
}

Tensor one_hot(const SegmentationLabelMap& labels) {
    std::vector<i64> shape = {kNumClasses};
    shape.insert(shape.end(), labels.shape.begin(), labels.shape.end());
    Tensor t(shape);
    const i64 sp = labels.numel();
    for (i64 i = 0; i < sp; ++i) t[label_to_class(labels.labels[std::size_t(i)]) * sp + i] = 1.0;
    return t;
}

double ramp_up(std::int64_t step, std::int64_t ramp_length, double amplitude) {
    if (ramp_length <= 0) throw ConfigError("ramp_up: ramp length must be positive");
    if (step < 0) throw ConfigError("ramp_up: step must be nonnegative");
    const double s = double(std::min(step, ramp_length));
    const double r = 1.0 - s / double(ramp_length);
    return amplitude * std::exp(-5.0 * r * r);
}

std::string LossBreakdown::to_string() const {
    std::ostringstream os;
    os.precision(6);
    os << "total=" << total << " dice_multi=" << dice_multi << " dice_uni=" << dice_uni
       << " consistency=" << consistency << " en_adv=" << en_adv_gen << " kn_adv=" << kn_adv_gen
       << " mi=" << mi << " omega=" << omega;
    return os.str();
}

TotalLoss total_loss(const LossParts& parts, const LossWeights& w, std::int64_t step) {
    w.validate();
    struct Named {
        const char* name;
        const Var* var;
        double coeff;
    };
    const double omega = ramp_up(step, w.ramp_length, w.ramp_amplitude);
    const Named named[] = {
        {"dice_multi", &parts.dice_multi, w.lambda_multi},
        {"dice_uni", &parts.dice_uni, w.lambda_uni},
        {"consistency", &parts.consistency, omega},
        {"en_adv_gen", &parts.en_adv_gen, w.lambda0},
        {"kn_adv_gen", &parts.kn_adv_gen, w.lambda1},
        {"mi", &parts.mi, w.lambda2},
    };
    std::vector<Var> vars;
    std::vector<double> coeffs;
    for (const auto& t : named) {
        if (!t.var->defined()) throw ConfigError(std::string("total_loss: part '") + t.name + "' missing");
        if (t.var->value().numel() != 1)
            throw ConfigError(std::string("total_loss: part '") + t.name + "' is not scalar");
        const double v = t.var->value()[0];
        if (!std::isfinite(v))
            throw NumericError(std::string("total_loss: part '") + t.name + "' is not finite (" +
                               std::to_string(v) + ")");
        vars.push_back(*t.var);
        coeffs.push_back(t.coeff);
    }
    TotalLoss out;
    out.total = ad::affine_sum(vars, coeffs);
    out.breakdown.dice_multi = parts.dice_multi.value()[0];
    out.breakdown.dice_uni = parts.dice_uni.value()[0];
    out.breakdown.consistency = parts.consistency.value()[0];
    out.breakdown.en_adv_gen = parts.en_adv_gen.value()[0];
    out.breakdown.kn_adv_gen = parts.kn_adv_gen.value()[0];
    out.breakdown.mi = parts.mi.value()[0];
    out.breakdown.w_dice_multi = w.lambda_multi * out.breakdown.dice_multi;
    out.breakdown.w_dice_uni = w.lambda_uni * out.breakdown.dice_uni;
    out.breakdown.w_consistency = omega * out.breakdown.consistency;
    out.breakdown.w_en_adv_gen = w.lambda0 * out.breakdown.en_adv_gen;
    out.breakdown.w_kn_adv_gen = w.lambda1 * out.breakdown.kn_adv_gen;
    out.breakdown.w_mi = w.lambda2 * out.breakdown.mi;
    out.breakdown.omega = omega;
    out.breakdown.total = out.total.value()[0];
    return out;
}

}  // namespace acn
