// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/ad.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "acn/error.hpp"

namespace acn::ad {

namespace {

thread_local bool g_grad_enabled = true;

using i64 = std::int64_t;

// C[M,N] += A[M,K] * B[K,N]
void mm_nn(const double* A, const double* B, double* C, i64 M, i64 K, i64 N) {
    for (i64 m = 0; m < M; ++m) {
        double* Cm = C + m * N;
        const double* Am = A + m * K;
        for (i64 k = 0; k < K; ++k) {
            double a = Am[k];
            if (a == 0.0) continue;
            const double* Bk = B + k * N;
            for (i64 n = 0; n < N; ++n) Cm[n] += a * Bk[n];
        }
    }
}

// C[M,N] += A^T * B with A[K,M], B[K,N]
void mm_tn(const double* A, const double* B, double* C, i64 M, i64 K, i64 N) {
    for (i64 k = 0; k < K; ++k) {
        const double* Ak = A + k * M;
        const double* Bk = B + k * N;
        for (i64 m = 0; m < M; ++m) {
            double a = Ak[m];
            if (a == 0.0) continue;
            double* Cm = C + m * N;
            for (i64 n = 0; n < N; ++n) Cm[n] += a * Bk[n];
        }
    }
}

// C[M,N] += A[M,K] * B^T with B[N,K]
void mm_nt(const double* A, const double* B, double* C, i64 M, i64 K, i64 N) {
    for (i64 m = 0; m < M; ++m) {
        const double* Am = A + m * K;
        for (i64 n = 0; n < N; ++n) {
            const double* Bn = B + n * K;
            double s = 0.0;
            for (i64 k = 0; k < K; ++k) s += Am[k] * Bn[k];
            C[m * N + n] += s;
        }
    }
}

std::vector<i64> spatial_of(const Tensor& t) {
    return {t.shape().begin() + 2, t.shape().end()};
}

i64 prod(const std::vector<i64>& v) {
    i64 p = 1;
    for (auto d : v) p *= d;
    return p;
}

void check_activation(const Tensor& t, const char* op) {
    if (t.rank() < 3 || t.rank() > 5)
        throw ConfigError(std::string(op) + ": expected [B, C, spatial...] tensor, got " + t.shape_str());
}

// x: one batch item [Cin, H, W] -> cols [Cin*kh*kw, OH*OW]
void im2col_2d(const double* x, i64 Cin, i64 H, i64 W, i64 kh, i64 kw, i64 stride, i64 pad,
               i64 OH, i64 OW, double* cols) {
    const i64 P = OH * OW;
    i64 r = 0;
    for (i64 ci = 0; ci < Cin; ++ci) {
        const double* xc = x + ci * H * W;
        for (i64 ki = 0; ki < kh; ++ki) {
            for (i64 kj = 0; kj < kw; ++kj, ++r) {
                double* dst = cols + r * P;
                for (i64 oi = 0; oi < OH; ++oi) {
                    i64 ii = oi * stride + ki - pad;
                    double* drow = dst + oi * OW;
                    if (ii < 0 || ii >= H) {
                        std::fill(drow, drow + OW, 0.0);
                        continue;
                    }
                    const double* xrow = xc + ii * W;
                    for (i64 oj = 0; oj < OW; ++oj) {
                        i64 jj = oj * stride + kj - pad;
                        drow[oj] = (jj >= 0 && jj < W) ? xrow[jj] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_2d(const double* cols, i64 Cin, i64 H, i64 W, i64 kh, i64 kw, i64 stride, i64 pad,
               i64 OH, i64 OW, double* dx) {
    const i64 P = OH * OW;
    i64 r = 0;
    for (i64 ci = 0; ci < Cin; ++ci) {
        double* xc = dx + ci * H * W;
        for (i64 ki = 0; ki < kh; ++ki) {
            for (i64 kj = 0; kj < kw; ++kj, ++r) {
                const double* src = cols + r * P;
                for (i64 oi = 0; oi < OH; ++oi) {
                    i64 ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= H) continue;
                    double* xrow = xc + ii * W;
                    const double* srow = src + oi * OW;
                    for (i64 oj = 0; oj < OW; ++oj) {
                        i64 jj = oj * stride + kj - pad;
                        if (jj >= 0 && jj < W) xrow[jj] += srow[oj];
                    }
                }
            }
        }
    }
}

void im2col_3d(const double* x, i64 Cin, i64 D, i64 H, i64 W, i64 kd, i64 kh, i64 kw,
               i64 stride, i64 pad, i64 OD, i64 OH, i64 OW, double* cols) {
    const i64 P = OD * OH * OW;
    i64 r = 0;
    for (i64 ci = 0; ci < Cin; ++ci) {
        const double* xc = x + ci * D * H * W;
        for (i64 kz = 0; kz < kd; ++kz)
            for (i64 ki = 0; ki < kh; ++ki)
                for (i64 kj = 0; kj < kw; ++kj, ++r) {
                    double* dst = cols + r * P;
                    for (i64 od = 0; od < OD; ++od) {
                        i64 dd = od * stride + kz - pad;
                        for (i64 oi = 0; oi < OH; ++oi) {
                            i64 ii = oi * stride + ki - pad;
                            double* drow = dst + (od * OH + oi) * OW;
                            if (dd < 0 || dd >= D || ii < 0 || ii >= H) {
                                std::fill(drow, drow + OW, 0.0);
                                continue;
                            }
                            const double* xrow = xc + (dd * H + ii) * W;
                            for (i64 oj = 0; oj < OW; ++oj) {
                                i64 jj = oj * stride + kj - pad;
                                drow[oj] = (jj >= 0 && jj < W) ? xrow[jj] : 0.0;
                            }
                        }
                    }
                }
    }
}

void col2im_3d(const double* cols, i64 Cin, i64 D, i64 H, i64 W, i64 kd, i64 kh, i64 kw,
               i64 stride, i64 pad, i64 OD, i64 OH, i64 OW, double* dx) {
    const i64 P = OD * OH * OW;
    i64 r = 0;
    for (i64 ci = 0; ci < Cin; ++ci) {
        double* xc = dx + ci * D * H * W;
        for (i64 kz = 0; kz < kd; ++kz)
            for (i64 ki = 0; ki < kh; ++ki)
                for (i64 kj = 0; kj < kw; ++kj, ++r) {
                    const double* src = cols + r * P;
                    for (i64 od = 0; od < OD; ++od) {
                        i64 dd = od * stride + kz - pad;
                        if (dd < 0 || dd >= D) continue;
                        for (i64 oi = 0; oi < OH; ++oi) {
                            i64 ii = oi * stride + ki - pad;
                            if (ii < 0 || ii >= H) continue;
                            double* xrow = xc + (dd * H + ii) * W;
                            const double* srow = src + (od * OH + oi) * OW;
                            for (i64 oj = 0; oj < OW; ++oj) {
                                i64 jj = oj * stride + kj - pad;
                                if (jj >= 0 && jj < W) xrow[jj] += srow[oj];
                            }
                        }
                    }
                }
    }
}

}  // namespace

Var Var::detach() const {
    auto n = std::make_shared<Node>();
    n->value = n_->value;
    n->requires_grad = false;
    return Var(std::move(n));
}

Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad && g_grad_enabled;
    return Var(std::move(n));
}

Var parameter(Tensor value) {
    // Parameters stay trainable even if created under a NoGradGuard.
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
}

Var constant(Tensor value) { return leaf(std::move(value), false); }

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool any = false;
    if (g_grad_enabled)
        for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(backward_fn);
    }
    return Var(std::move(n));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void ensure_grad(Node& n) {
    if (!n.grad.defined() || n.grad.numel() != n.value.numel()) n.grad = Tensor(n.value.shape());
}

void zero_grad(const std::vector<Var>& params) {
    for (const auto& p : params) {
        ensure_grad(*p.node());
        p.node()->grad.zero();
    }
}

void backward(const Var& root) {
    Node* r = root.node().get();
    if (r->value.numel() != 1) throw ConfigError("ad::backward: root must be scalar");
    if (!r->requires_grad) return;

    std::vector<Node*> post;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(r, 0);
    visited.insert(r);
    while (!stack.empty()) {
        auto& top = stack.back();
        Node* n = top.first;
        if (top.second < n->parents.size()) {
            Node* p = n->parents[top.second++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            post.push_back(n);
            stack.pop_back();
        }
    }

    // Interior gradients are per-pass scratch; only leaves accumulate
    // across backward calls.
    for (Node* n : post)
        if (n->backward) {
            ensure_grad(*n);
            n->grad.zero();
        }
    ensure_grad(*r);
    r->grad[0] += 1.0;
    // Reverse post-order: every consumer runs before its inputs.
    for (auto it = post.rbegin(); it != post.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

// ---- operators -----------------------------------------------------------

Var conv(const Var& x, const Var& w, const Var& b, i64 stride, i64 pad) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    check_activation(xv, "conv");
    const int spatial_rank = xv.rank() - 2;
    if (wv.rank() != spatial_rank + 2)
        throw ConfigError("conv: weight rank " + wv.shape_str() + " does not match input " + xv.shape_str());
    const i64 B = xv.dim(0), Cin = xv.dim(1), Cout = wv.dim(0);
    if (wv.dim(1) != Cin)
        throw ConfigError("conv: input has " + std::to_string(Cin) + " channels, weight expects " +
                          std::to_string(wv.dim(1)));
    if (bv.rank() != 1 || bv.dim(0) != Cout) throw ConfigError("conv: bias shape mismatch");
    if (stride < 1 || pad < 0) throw ConfigError("conv: bad stride/pad");

    std::vector<i64> S = spatial_of(xv);
    std::vector<i64> K(wv.shape().begin() + 2, wv.shape().end());
    std::vector<i64> O(S.size());
    for (std::size_t i = 0; i < S.size(); ++i) {
        i64 o = (S[i] + 2 * pad - K[i]) / stride + 1;
        if (o < 1)
            throw ConfigError("conv: spatial dim " + std::to_string(S[i]) + " too small for kernel " +
                              std::to_string(K[i]));
        O[i] = o;
    }
    const i64 R = Cin * prod(K);
    const i64 P = prod(O);

    std::vector<i64> out_shape = {B, Cout};
    out_shape.insert(out_shape.end(), O.begin(), O.end());
    Tensor y(out_shape);

    const bool keep_cols = g_grad_enabled && (x.requires_grad() || w.requires_grad() || b.requires_grad());
    std::vector<Tensor> cols_cache;
    if (keep_cols) cols_cache.reserve(std::size_t(B));

    Tensor cols({R, P});
    for (i64 bi = 0; bi < B; ++bi) {
        const double* xb = xv.data() + bi * Cin * prod(S);
        if (spatial_rank == 2)
            im2col_2d(xb, Cin, S[0], S[1], K[0], K[1], stride, pad, O[0], O[1], cols.data());
        else
            im2col_3d(xb, Cin, S[0], S[1], S[2], K[0], K[1], K[2], stride, pad, O[0], O[1], O[2],
                      cols.data());
        double* yb = y.data() + bi * Cout * P;
        mm_nn(wv.data(), cols.data(), yb, Cout, R, P);
        for (i64 co = 0; co < Cout; ++co) {
            double bias = bv[co];
            double* yc = yb + co * P;
            for (i64 p = 0; p < P; ++p) yc[p] += bias;
        }
        if (keep_cols) cols_cache.push_back(cols);
    }

    auto bwd = [spatial_rank, B, Cin, Cout, S, K, O, R, P, stride, pad,
                cols = std::move(cols_cache)](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        Node& bn = *self.parents[2];
        if (xn.requires_grad) ensure_grad(xn);
        if (wn.requires_grad) ensure_grad(wn);
        if (bn.requires_grad) ensure_grad(bn);
        Tensor dcols({R, P});
        for (i64 bi = 0; bi < B; ++bi) {
            const double* dyb = self.grad.data() + bi * Cout * P;
            if (wn.requires_grad)
                mm_nt(dyb, cols[std::size_t(bi)].data(), wn.grad.data(), Cout, P, R);
            if (bn.requires_grad) {
                for (i64 co = 0; co < Cout; ++co) {
                    double s = 0.0;
                    const double* dyc = dyb + co * P;
                    for (i64 p = 0; p < P; ++p) s += dyc[p];
                    bn.grad[co] += s;
                }
            }
            if (xn.requires_grad) {
                dcols.zero();
                mm_tn(wn.value.data(), dyb, dcols.data(), R, Cout, P);
                double* dxb = xn.grad.data() + bi * Cin * prod(S);
                if (spatial_rank == 2)
                    col2im_2d(dcols.data(), Cin, S[0], S[1], K[0], K[1], stride, pad, O[0], O[1], dxb);
                else
                    col2im_3d(dcols.data(), Cin, S[0], S[1], S[2], K[0], K[1], K[2], stride, pad,
                              O[0], O[1], O[2], dxb);
            }
        }
    };
    return make_op(std::move(y), {x, w, b}, std::move(bwd));
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Tensor& xv = x.value();
    check_activation(xv, "instance_norm");
    const i64 B = xv.dim(0), C = xv.dim(1), S = xv.numel_from(2);
    if (gamma.value().numel() != C || beta.value().numel() != C)
        throw ConfigError("instance_norm: affine params must have C elements");

    Tensor y(xv.shape());
    Tensor xhat(xv.shape());
    Tensor inv_std({B, C});
    for (i64 b = 0; b < B; ++b) {
        for (i64 c = 0; c < C; ++c) {
            const double* xc = xv.data() + (b * C + c) * S;
            double m = 0.0;
            for (i64 i = 0; i < S; ++i) m += xc[i];
            m /= double(S);
            double var = 0.0;
            for (i64 i = 0; i < S; ++i) {
                double d = xc[i] - m;
                var += d * d;
            }
            var /= double(S);
            double is = 1.0 / std::sqrt(var + eps);
            inv_std[b * C + c] = is;
            double g = gamma.value()[c], be = beta.value()[c];
            double* yc = y.data() + (b * C + c) * S;
            double* hc = xhat.data() + (b * C + c) * S;
            for (i64 i = 0; i < S; ++i) {
                double h = (xc[i] - m) * is;
                hc[i] = h;
                yc[i] = g * h + be;
            }
        }
    }

    auto bwd = [B, C, S, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& xn = *self.parents[0];
        Node& gn = *self.parents[1];
        Node& bn = *self.parents[2];
        if (xn.requires_grad) ensure_grad(xn);
        if (gn.requires_grad) ensure_grad(gn);
        if (bn.requires_grad) ensure_grad(bn);
        for (i64 b = 0; b < B; ++b) {
            for (i64 c = 0; c < C; ++c) {
                const double* dy = self.grad.data() + (b * C + c) * S;
                const double* h = xhat.data() + (b * C + c) * S;
                double sum_dy = 0.0, sum_dyh = 0.0;
                for (i64 i = 0; i < S; ++i) {
                    sum_dy += dy[i];
                    sum_dyh += dy[i] * h[i];
                }
                if (gn.requires_grad) gn.grad[c] += sum_dyh;
                if (bn.requires_grad) bn.grad[c] += sum_dy;
                if (xn.requires_grad) {
                    double g = gn.value[c];
                    double is = inv_std[b * C + c];
                    double mean_dy = sum_dy / double(S), mean_dyh = sum_dyh / double(S);
                    double* dx = xn.grad.data() + (b * C + c) * S;
                    for (i64 i = 0; i < S; ++i)
                        dx[i] += g * is * (dy[i] - mean_dy - h[i] * mean_dyh);
                }
            }
        }
    };
    return make_op(std::move(y), {x, gamma, beta}, std::move(bwd));
}

Var leaky_relu(const Var& x, double negative_slope) {
    const Tensor& xv = x.value();
    Tensor y(xv.shape());
    const i64 n = xv.numel();
    for (i64 i = 0; i < n; ++i) y[i] = xv[i] > 0.0 ? xv[i] : negative_slope * xv[i];
    auto bwd = [negative_slope, n](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        for (i64 i = 0; i < n; ++i)
            xn.grad[i] += self.grad[i] * (xn.value[i] > 0.0 ? 1.0 : negative_slope);
    };
    return make_op(std::move(y), {x}, std::move(bwd));
}

Var softmax_channels(const Var& x, double tau) {
    if (tau <= 0.0) throw ConfigError("softmax_channels: temperature must be positive");
    const Tensor& xv = x.value();
    check_activation(xv, "softmax_channels");
    const i64 B = xv.dim(0), C = xv.dim(1), S = xv.numel_from(2);

    Tensor p(xv.shape());
    for (i64 b = 0; b < B; ++b) {
        const double* xb = xv.data() + b * C * S;
        double* pb = p.data() + b * C * S;
        for (i64 i = 0; i < S; ++i) {
            double mx = -1e300;
            for (i64 c = 0; c < C; ++c) mx = std::max(mx, xb[c * S + i] / tau);
            double z = 0.0;
            for (i64 c = 0; c < C; ++c) {
                double e = std::exp(xb[c * S + i] / tau - mx);
                pb[c * S + i] = e;
                z += e;
            }
            for (i64 c = 0; c < C; ++c) pb[c * S + i] /= z;
        }
    }

    Tensor p_saved = p;
    auto bwd = [B, C, S, tau, p = std::move(p_saved)](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        for (i64 b = 0; b < B; ++b) {
            const double* dy = self.grad.data() + b * C * S;
            const double* pb = p.data() + b * C * S;
            double* dx = xn.grad.data() + b * C * S;
            for (i64 i = 0; i < S; ++i) {
                double dot = 0.0;
                for (i64 c = 0; c < C; ++c) dot += dy[c * S + i] * pb[c * S + i];
                for (i64 c = 0; c < C; ++c)
                    dx[c * S + i] += pb[c * S + i] * (dy[c * S + i] - dot) / tau;
            }
        }
    };
    return make_op(std::move(p), {x}, std::move(bwd));
}

Var max_pool2(const Var& x) {
    const Tensor& xv = x.value();
    check_activation(xv, "max_pool2");
    const int spatial_rank = xv.rank() - 2;
    std::vector<i64> S = spatial_of(xv);
    for (auto d : S)
        if (d % 2 != 0) throw ConfigError("max_pool2: spatial dims must be even, got " + xv.shape_str());
    const i64 B = xv.dim(0), C = xv.dim(1);
    std::vector<i64> O(S.size());
    for (std::size_t i = 0; i < S.size(); ++i) O[i] = S[i] / 2;
    std::vector<i64> out_shape = {B, C};
    out_shape.insert(out_shape.end(), O.begin(), O.end());

    Tensor y(out_shape);
    std::vector<i64> arg(std::size_t(y.numel()));
    const i64 in_sp = prod(S), out_sp = prod(O);

    for (i64 bc = 0; bc < B * C; ++bc) {
        const double* xc = xv.data() + bc * in_sp;
        double* yc = y.data() + bc * out_sp;
        i64* ac = arg.data() + bc * out_sp;
        if (spatial_rank == 2) {
            for (i64 oi = 0; oi < O[0]; ++oi)
                for (i64 oj = 0; oj < O[1]; ++oj) {
                    i64 best = (2 * oi) * S[1] + 2 * oj;
                    double bv = xc[best];
                    for (i64 di = 0; di < 2; ++di)
                        for (i64 dj = 0; dj < 2; ++dj) {
                            i64 idx = (2 * oi + di) * S[1] + (2 * oj + dj);
                            if (xc[idx] > bv) {
                                bv = xc[idx];
                                best = idx;
                            }
                        }
                    yc[oi * O[1] + oj] = bv;
                    ac[oi * O[1] + oj] = bc * in_sp + best;
                }
        } else {
            for (i64 od = 0; od < O[0]; ++od)
                for (i64 oi = 0; oi < O[1]; ++oi)
                    for (i64 oj = 0; oj < O[2]; ++oj) {
                        i64 best = ((2 * od) * S[1] + 2 * oi) * S[2] + 2 * oj;
                        double bv = xc[best];
                        for (i64 dz = 0; dz < 2; ++dz)
                            for (i64 di = 0; di < 2; ++di)
                                for (i64 dj = 0; dj < 2; ++dj) {
                                    i64 idx = ((2 * od + dz) * S[1] + (2 * oi + di)) * S[2] +
                                              (2 * oj + dj);
                                    if (xc[idx] > bv) {
                                        bv = xc[idx];
                                        best = idx;
                                    }
                                }
                        yc[(od * O[1] + oi) * O[2] + oj] = bv;
                        ac[(od * O[1] + oi) * O[2] + oj] = bc * in_sp + best;
                    }
        }
    }

    auto bwd = [arg = std::move(arg)](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        const i64 n = self.grad.numel();
        for (i64 i = 0; i < n; ++i) xn.grad[arg[std::size_t(i)]] += self.grad[i];
    };
    return make_op(std::move(y), {x}, std::move(bwd));
}

Var upsample_nearest2(const Var& x) {
    const Tensor& xv = x.value();
    check_activation(xv, "upsample_nearest2");
    const int spatial_rank = xv.rank() - 2;
    std::vector<i64> S = spatial_of(xv);
    const i64 B = xv.dim(0), C = xv.dim(1);
    std::vector<i64> O(S.size());
    for (std::size_t i = 0; i < S.size(); ++i) O[i] = S[i] * 2;
    std::vector<i64> out_shape = {B, C};
    out_shape.insert(out_shape.end(), O.begin(), O.end());
    Tensor y(out_shape);
    const i64 in_sp = prod(S), out_sp = prod(O);

    for (i64 bc = 0; bc < B * C; ++bc) {
        const double* xc = xv.data() + bc * in_sp;
        double* yc = y.data() + bc * out_sp;
        if (spatial_rank == 2) {
            for (i64 i = 0; i < O[0]; ++i)
                for (i64 j = 0; j < O[1]; ++j) yc[i * O[1] + j] = xc[(i / 2) * S[1] + j / 2];
        } else {
            for (i64 d = 0; d < O[0]; ++d)
                for (i64 i = 0; i < O[1]; ++i)
                    for (i64 j = 0; j < O[2]; ++j)
                        yc[(d * O[1] + i) * O[2] + j] = xc[((d / 2) * S[1] + i / 2) * S[2] + j / 2];
        }
    }

    auto bwd = [spatial_rank, B, C, S, O, in_sp, out_sp](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        for (i64 bc = 0; bc < B * C; ++bc) {
            const double* dy = self.grad.data() + bc * out_sp;
            double* dx = xn.grad.data() + bc * in_sp;
            if (spatial_rank == 2) {
                for (i64 i = 0; i < O[0]; ++i)
                    for (i64 j = 0; j < O[1]; ++j) dx[(i / 2) * S[1] + j / 2] += dy[i * O[1] + j];
            } else {
                for (i64 d = 0; d < O[0]; ++d)
                    for (i64 i = 0; i < O[1]; ++i)
                        for (i64 j = 0; j < O[2]; ++j)
                            dx[((d / 2) * S[1] + i / 2) * S[2] + j / 2] +=
                                dy[(d * O[1] + i) * O[2] + j];
            }
        }
    };
    return make_op(std::move(y), {x}, std::move(bwd));
}

Var concat_channels(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    check_activation(av, "concat_channels");
    if (av.rank() != bv.rank() || av.dim(0) != bv.dim(0) || spatial_of(av) != spatial_of(bv))
        throw ConfigError("concat_channels: incompatible shapes " + av.shape_str() + " vs " + bv.shape_str());
    const i64 B = av.dim(0), Ca = av.dim(1), Cb = bv.dim(1), S = av.numel_from(2);
    std::vector<i64> out_shape = av.shape();
    out_shape[1] = Ca + Cb;
    Tensor y(out_shape);
    for (i64 bi = 0; bi < B; ++bi) {
        std::copy_n(av.data() + bi * Ca * S, Ca * S, y.data() + bi * (Ca + Cb) * S);
        std::copy_n(bv.data() + bi * Cb * S, Cb * S, y.data() + bi * (Ca + Cb) * S + Ca * S);
    }
    auto bwd = [B, Ca, Cb, S](Node& self) {
        Node& an = *self.parents[0];
        Node& bn = *self.parents[1];
        for (i64 bi = 0; bi < B; ++bi) {
            const double* dy = self.grad.data() + bi * (Ca + Cb) * S;
            if (an.requires_grad) {
                ensure_grad(an);
                double* da = an.grad.data() + bi * Ca * S;
                for (i64 i = 0; i < Ca * S; ++i) da[i] += dy[i];
            }
            if (bn.requires_grad) {
                ensure_grad(bn);
                double* db = bn.grad.data() + bi * Cb * S;
                for (i64 i = 0; i < Cb * S; ++i) db[i] += dy[Ca * S + i];
            }
        }
    };
    return make_op(std::move(y), {a, b}, std::move(bwd));
}

Var global_avg_pool(const Var& x) {
    const Tensor& xv = x.value();
    check_activation(xv, "global_avg_pool");
    const i64 B = xv.dim(0), C = xv.dim(1), S = xv.numel_from(2);
    Tensor y({B, C});
    for (i64 bc = 0; bc < B * C; ++bc) {
        const double* xc = xv.data() + bc * S;
        double s = 0.0;
        for (i64 i = 0; i < S; ++i) s += xc[i];
        y[bc] = s / double(S);
    }
    auto bwd = [B, C, S](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        for (i64 bc = 0; bc < B * C; ++bc) {
            double g = self.grad[bc] / double(S);
            double* dx = xn.grad.data() + bc * S;
            for (i64 i = 0; i < S; ++i) dx[i] += g;
        }
    };
    return make_op(std::move(y), {x}, std::move(bwd));
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1))
        throw ConfigError("linear: shape mismatch " + xv.shape_str() + " vs " + wv.shape_str());
    const i64 B = xv.dim(0), Cin = xv.dim(1), Cout = wv.dim(0);
    if (bv.numel() != Cout) throw ConfigError("linear: bias shape mismatch");
    Tensor y({B, Cout});
    for (i64 bi = 0; bi < B; ++bi)
        for (i64 co = 0; co < Cout; ++co) {
            double s = bv[co];
            const double* xr = xv.data() + bi * Cin;
            const double* wr = wv.data() + co * Cin;
            for (i64 k = 0; k < Cin; ++k) s += xr[k] * wr[k];
            y[bi * Cout + co] = s;
        }
    auto bwd = [B, Cin, Cout](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        Node& bn = *self.parents[2];
        for (i64 bi = 0; bi < B; ++bi)
            for (i64 co = 0; co < Cout; ++co) {
                double g = self.grad[bi * Cout + co];
                if (bn.requires_grad) {
                    ensure_grad(bn);
                    bn.grad[co] += g;
                }
                if (wn.requires_grad) {
                    ensure_grad(wn);
                    for (i64 k = 0; k < Cin; ++k) wn.grad[co * Cin + k] += g * xn.value[bi * Cin + k];
                }
                if (xn.requires_grad) {
                    ensure_grad(xn);
                    for (i64 k = 0; k < Cin; ++k) xn.grad[bi * Cin + k] += g * wn.value[co * Cin + k];
                }
            }
    };
    return make_op(std::move(y), {x, w, b}, std::move(bwd));
}

Var softplus(const Var& x) {
    const Tensor& xv = x.value();
    Tensor y(xv.shape());
    const i64 n = xv.numel();
    for (i64 i = 0; i < n; ++i) {
        double v = xv[i];
        y[i] = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    }
    auto bwd = [n](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        for (i64 i = 0; i < n; ++i) {
            double s = 1.0 / (1.0 + std::exp(-xn.value[i]));
            xn.grad[i] += self.grad[i] * s;
        }
    };
    return make_op(std::move(y), {x}, std::move(bwd));
}

Var channel_sum(const Var& x) {
    const Tensor& xv = x.value();
    check_activation(xv, "channel_sum");
    const i64 B = xv.dim(0), C = xv.dim(1), S = xv.numel_from(2);
    std::vector<i64> out_shape = xv.shape();
    out_shape[1] = 1;
    Tensor y(out_shape);
    for (i64 b = 0; b < B; ++b)
        for (i64 c = 0; c < C; ++c) {
            const double* xc = xv.data() + (b * C + c) * S;
            double* yb = y.data() + b * S;
            for (i64 i = 0; i < S; ++i) yb[i] += xc[i];
        }
    auto bwd = [B, C, S](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        for (i64 b = 0; b < B; ++b)
            for (i64 c = 0; c < C; ++c) {
                double* dx = xn.grad.data() + (b * C + c) * S;
                const double* dy = self.grad.data() + b * S;
                for (i64 i = 0; i < S; ++i) dx[i] += dy[i];
            }
    };
    return make_op(std::move(y), {x}, std::move(bwd));
}

Var add(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value())) throw ConfigError("add: shape mismatch");
    Tensor y(a.value().shape());
    const i64 n = y.numel();
    for (i64 i = 0; i < n; ++i) y[i] = a.value()[i] + b.value()[i];
    auto bwd = [n](Node& self) {
        for (int p = 0; p < 2; ++p) {
            Node& pn = *self.parents[std::size_t(p)];
            if (!pn.requires_grad) continue;
            ensure_grad(pn);
            for (i64 i = 0; i < n; ++i) pn.grad[i] += self.grad[i];
        }
    };
    return make_op(std::move(y), {a, b}, std::move(bwd));
}

Var scale(const Var& x, double c) {
    Tensor y(x.value().shape());
    const i64 n = y.numel();
    for (i64 i = 0; i < n; ++i) y[i] = c * x.value()[i];
    auto bwd = [c, n](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        for (i64 i = 0; i < n; ++i) xn.grad[i] += c * self.grad[i];
    };
    return make_op(std::move(y), {x}, std::move(bwd));
}

Var sum(const Var& x) {
    Tensor y({1});
    y[0] = x.value().sum();
    const i64 n = x.value().numel();
    auto bwd = [n](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        ensure_grad(xn);
        double g = self.grad[0];
        for (i64 i = 0; i < n; ++i) xn.grad[i] += g;
    };
    return make_op(std::move(y), {x}, std::move(bwd));
}

Var mean(const Var& x) {
    const i64 n = x.value().numel();
    if (n == 0) throw ConfigError("mean: empty tensor");
    return scale(sum(x), 1.0 / double(n));
}

Var affine_sum(const std::vector<Var>& xs, const std::vector<double>& coeffs, double c0) {
    if (xs.size() != coeffs.size()) throw ConfigError("affine_sum: size mismatch");
    Tensor y({1});
    y[0] = c0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].value().numel() != 1) throw ConfigError("affine_sum: terms must be scalars");
        y[0] += coeffs[i] * xs[i].value()[0];
    }
    auto bwd = [coeffs](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            Node& pn = *self.parents[i];
            if (!pn.requires_grad) continue;
            ensure_grad(pn);
            pn.grad[0] += coeffs[i] * self.grad[0];
        }
    };
    return make_op(std::move(y), xs, std::move(bwd));
}

}  // namespace acn::ad
