#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ddnet/tensor.hpp"

namespace ddnet {

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Shifted 2-D accumulate: out[y][x] += w * in[y+dy][x+dx] over the valid range.
template <class S>
inline void shift_axpy(S* out, const S* in, S w, int H, int W, int dy, int dx) {
    const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
    const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
    for (int y = y0; y < y1; ++y) {
        S* orow = out + y * W;
        const S* irow = in + (y + dy) * W + dx;
        for (int x = x0; x < x1; ++x) orow[x] += w * irow[x];
    }
}

// Correlation of two planes under a shift: sum over valid (y,x) of a[y][x]*b[y+dy][x+dx].
template <class S>
inline S shift_dot(const S* a, const S* b, int H, int W, int dy, int dx) {
    const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
    const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
    S acc = 0;
    for (int y = y0; y < y1; ++y) {
        const S* arow = a + y * W;
        const S* brow = b + (y + dy) * W + dx;
        for (int x = x0; x < x1; ++x) acc += arow[x] * brow[x];
    }
    return acc;
}

}  // namespace detail

/// 2-D cross-correlation, same zero padding, odd kernel.
/// input [Cin,H,W], kernel [Cout,Cin,k,k], bias [Cout] -> [Cout,H,W].
template <class S>
Tensor<S> conv2d(Tensor<S> input, Tensor<S> kernel, Tensor<S> bias) {
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    detail::require(is.size() == 3, "conv2d: input must be [C,H,W], got " + shape_str(is));
    detail::require(ks.size() == 4, "conv2d: kernel must be [Cout,Cin,k,k], got " + shape_str(ks));
    detail::require(ks[2] == ks[3] && ks[2] % 2 == 1, "conv2d: kernel must be square with odd size");
    detail::require(ks[1] == is[0], "conv2d: channel mismatch, kernel expects " +
                                        std::to_string(ks[1]) + " got " + std::to_string(is[0]));
    detail::require(bias.shape() == Shape{ks[0]}, "conv2d: bias shape mismatch");

    const int Cin = is[0], H = is[1], W = is[2];
    const int Cout = ks[0], k = ks[2], p = k / 2;
    const int plane = H * W;

    std::vector<S> out(static_cast<std::size_t>(Cout) * plane);
    for (int co = 0; co < Cout; ++co)
        std::fill(out.begin() + co * plane, out.begin() + (co + 1) * plane, bias.data()[co]);
    for (int co = 0; co < Cout; ++co) {
        S* oc = out.data() + co * plane;
        for (int ci = 0; ci < Cin; ++ci) {
            const S* ic = input.data().data() + ci * plane;
            const S* kc = kernel.data().data() + (co * Cin + ci) * k * k;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx)
                    detail::shift_axpy(oc, ic, kc[ky * k + kx], H, W, ky - p, kx - p);
        }
    }

    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        {Cout, H, W}, std::move(out), {input, kernel, bias},
        [input, kernel, bias, Cin, H, W, Cout, k, p, plane](Node& self) mutable {
            const S* go = self.grad.data();
            if (bias.requires_grad()) {
                for (int co = 0; co < Cout; ++co) {
                    S acc = 0;
                    const S* gc = go + co * plane;
                    for (int i = 0; i < plane; ++i) acc += gc[i];
                    bias.grad()[co] += acc;
                }
            }
            for (int co = 0; co < Cout; ++co) {
                const S* gc = go + co * plane;
                for (int ci = 0; ci < Cin; ++ci) {
                    const S* ic = input.data().data() + ci * plane;
                    const S* kc = kernel.data().data() + (co * Cin + ci) * k * k;
                    S* gic = input.requires_grad() ? input.grad().data() + ci * plane : nullptr;
                    S* gkc = kernel.requires_grad() ? kernel.grad().data() + (co * Cin + ci) * k * k : nullptr;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int dy = ky - p, dx = kx - p;
                            if (gic) detail::shift_axpy(gic, gc, kc[ky * k + kx], H, W, -dy, -dx);
                            if (gkc) gkc[ky * k + kx] += detail::shift_dot(gc, ic, H, W, dy, dx);
                        }
                }
            }
        });
}

/// 3-D cross-correlation over (time, H, W) with same zero padding on all axes.
/// input [L,Cin,H,W], kernel [Cout,Cin,kt,kh,kw], bias [Cout] -> [L,Cout,H,W].
template <class S>
Tensor<S> conv3d(Tensor<S> input, Tensor<S> kernel, Tensor<S> bias) {
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    detail::require(is.size() == 4, "conv3d: input must be [L,C,H,W], got " + shape_str(is));
    detail::require(ks.size() == 5, "conv3d: kernel must be [Cout,Cin,kt,kh,kw]");
    detail::require(ks[2] % 2 == 1 && ks[3] % 2 == 1 && ks[4] % 2 == 1, "conv3d: kernel dims must be odd");
    detail::require(ks[1] == is[1], "conv3d: channel mismatch");
    detail::require(bias.shape() == Shape{ks[0]}, "conv3d: bias shape mismatch");

    const int L = is[0], Cin = is[1], H = is[2], W = is[3];
    const int Cout = ks[0], kt = ks[2], kh = ks[3], kw = ks[4];
    detail::require(kh == kw, "conv3d: spatial kernel must be square");
    const int pt = kt / 2, p = kh / 2;
    const int plane = H * W;

    std::vector<S> out(static_cast<std::size_t>(L) * Cout * plane);
    for (int t = 0; t < L; ++t)
        for (int co = 0; co < Cout; ++co) {
            S* oc = out.data() + (t * Cout + co) * plane;
            std::fill(oc, oc + plane, bias.data()[co]);
            for (int dt = -pt; dt <= pt; ++dt) {
                const int ti = t + dt;
                if (ti < 0 || ti >= L) continue;
                for (int ci = 0; ci < Cin; ++ci) {
                    const S* ic = input.data().data() + (ti * Cin + ci) * plane;
                    const S* kc = kernel.data().data() +
                                  (((co * Cin + ci) * kt + (dt + pt)) * kh) * kw;
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx)
                            detail::shift_axpy(oc, ic, kc[ky * kw + kx], H, W, ky - p, kx - p);
                }
            }
        }

    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        {L, Cout, H, W}, std::move(out), {input, kernel, bias},
        [input, kernel, bias, L, Cin, H, W, Cout, kt, kh, kw, pt, p, plane](Node& self) mutable {
            for (int t = 0; t < L; ++t)
                for (int co = 0; co < Cout; ++co) {
                    const S* gc = self.grad.data() + (t * Cout + co) * plane;
                    if (bias.requires_grad()) {
                        S acc = 0;
                        for (int i = 0; i < plane; ++i) acc += gc[i];
                        bias.grad()[co] += acc;
                    }
                    for (int dt = -pt; dt <= pt; ++dt) {
                        const int ti = t + dt;
                        if (ti < 0 || ti >= L) continue;
                        for (int ci = 0; ci < Cin; ++ci) {
                            const S* ic = input.data().data() + (ti * Cin + ci) * plane;
                            const S* kc = kernel.data().data() +
                                          (((co * Cin + ci) * kt + (dt + pt)) * kh) * kw;
                            S* gic = input.requires_grad()
                                         ? input.grad().data() + (ti * Cin + ci) * plane : nullptr;
                            S* gkc = kernel.requires_grad()
                                         ? kernel.grad().data() +
                                               (((co * Cin + ci) * kt + (dt + pt)) * kh) * kw
                                         : nullptr;
                            for (int ky = 0; ky < kh; ++ky)
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int dy = ky - p, dx = kx - p;
                                    if (gic) detail::shift_axpy(gic, gc, kc[ky * kw + kx], H, W, -dy, -dx);
                                    if (gkc) gkc[ky * kw + kx] += detail::shift_dot(gc, ic, H, W, dy, dx);
                                }
                        }
                    }
                }
        });
}

enum class Activation { Sigmoid, Tanh };

template <class S>
Tensor<S> apply_activation(Tensor<S> x, Activation kind) {
    std::vector<S> out(x.numel());
    const auto& in = x.data();
    if (kind == Activation::Sigmoid)
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = S(1) / (S(1) + std::exp(-in[i]));
    else
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);

    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        x.shape(), std::move(out), {x},
        [x, kind](Node& self) mutable {
            if (!x.requires_grad()) return;
            S* gx = x.grad().data();
            const S* y = self.data.data();
            const S* gy = self.grad.data();
            if (kind == Activation::Sigmoid)
                for (std::size_t i = 0; i < self.data.size(); ++i) gx[i] += gy[i] * y[i] * (S(1) - y[i]);
            else
                for (std::size_t i = 0; i < self.data.size(); ++i) gx[i] += gy[i] * (S(1) - y[i] * y[i]);
        });
}

template <class S>
Tensor<S> add(Tensor<S> a, Tensor<S> b) {
    detail::require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                                " vs " + shape_str(b.shape()));
    std::vector<S> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        a.shape(), std::move(out), {a, b},
        [a, b](Node& self) mutable {
            if (a.requires_grad())
                for (std::size_t i = 0; i < self.grad.size(); ++i) a.grad()[i] += self.grad[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < self.grad.size(); ++i) b.grad()[i] += self.grad[i];
        });
}

template <class S>
Tensor<S> mul(Tensor<S> a, Tensor<S> b) {
    detail::require(a.shape() == b.shape(), "mul: shape mismatch");
    std::vector<S> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        a.shape(), std::move(out), {a, b},
        [a, b](Node& self) mutable {
            if (a.requires_grad())
                for (std::size_t i = 0; i < self.grad.size(); ++i) a.grad()[i] += self.grad[i] * b.data()[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < self.grad.size(); ++i) b.grad()[i] += self.grad[i] * a.data()[i];
        });
}

/// Channel slice [c0, c1) of an [C,H,W] tensor.
template <class S>
Tensor<S> slice_channels(Tensor<S> x, int c0, int c1) {
    const auto& s = x.shape();
    detail::require(s.size() == 3, "slice_channels: input must be [C,H,W]");
    detail::require(0 <= c0 && c0 < c1 && c1 <= s[0], "slice_channels: bad range");
    const int plane = s[1] * s[2];
    std::vector<S> out(x.data().begin() + c0 * plane, x.data().begin() + c1 * plane);
    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        {c1 - c0, s[1], s[2]}, std::move(out), {x},
        [x, c0, plane](Node& self) mutable {
            if (!x.requires_grad()) return;
            S* gx = x.grad().data() + c0 * plane;
            for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
        });
}

/// Stack per-step [C,H,W] tensors into one [L,C,H,W] sequence.
template <class S>
Tensor<S> stack_steps(std::vector<Tensor<S>> steps) {
    detail::require(!steps.empty(), "stack_steps: empty sequence");
    const auto& s = steps[0].shape();
    detail::require(s.size() == 3, "stack_steps: elements must be [C,H,W]");
    for (const auto& t : steps)
        detail::require(t.shape() == s, "stack_steps: inconsistent element shapes");
    const std::size_t n = shape_numel(s);
    const int L = static_cast<int>(steps.size());
    std::vector<S> out;
    out.reserve(n * steps.size());
    for (const auto& t : steps) out.insert(out.end(), t.data().begin(), t.data().end());
    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        {L, s[0], s[1], s[2]}, std::move(out), steps,
        [steps, n](Node& self) mutable {
            for (std::size_t j = 0; j < steps.size(); ++j) {
                if (!steps[j].requires_grad()) continue;
                const S* g = self.grad.data() + j * n;
                S* gs = steps[j].grad().data();
                for (std::size_t i = 0; i < n; ++i) gs[i] += g[i];
            }
        });
}

/// Time slice t of an [L,C,H,W] sequence -> [C,H,W].
template <class S>
Tensor<S> slice_step(Tensor<S> x, int t) {
    const auto& s = x.shape();
    detail::require(s.size() == 4, "slice_step: input must be [L,C,H,W]");
    detail::require(0 <= t && t < s[0], "slice_step: index out of range");
    const std::size_t n = static_cast<std::size_t>(s[1]) * s[2] * s[3];
    std::vector<S> out(x.data().begin() + t * n, x.data().begin() + (t + 1) * n);
    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        {s[1], s[2], s[3]}, std::move(out), {x},
        [x, t, n](Node& self) mutable {
            if (!x.requires_grad()) return;
            S* gx = x.grad().data() + t * n;
            for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[i];
        });
}

enum class BNMode { Train, Infer };

/// Spatial batch normalization over a single [C,H,W] sample.
/// Batch statistics reduce to per-channel spatial statistics. Train mode
/// mutates moving_mean/moving_var in place; those buffers are not part of
/// the autodiff graph.
template <class S>
Tensor<S> batchnorm(Tensor<S> x, Tensor<S> scale, Tensor<S> shift,
                    Tensor<S> moving_mean, Tensor<S> moving_var,
                    BNMode mode, S momentum, S eps_bn) {
    const auto& s = x.shape();
    detail::require(s.size() == 3, "batchnorm: input must be [C,H,W]");
    detail::require(eps_bn > S(0), "batchnorm: eps must be positive");
    const int C = s[0], plane = s[1] * s[2];
    detail::require(scale.shape() == Shape{C} && shift.shape() == Shape{C} &&
                        moving_mean.shape() == Shape{C} && moving_var.shape() == Shape{C},
                    "batchnorm: parameter shape mismatch for C=" + std::to_string(C));

    std::vector<S> mean(C), var(C);
    if (mode == BNMode::Train) {
        for (int c = 0; c < C; ++c) {
            const S* xc = x.data().data() + c * plane;
            S m = 0;
            for (int i = 0; i < plane; ++i) m += xc[i];
            m /= S(plane);
            S v = 0;
            for (int i = 0; i < plane; ++i) v += (xc[i] - m) * (xc[i] - m);
            v /= S(plane);
            mean[c] = m;
            var[c] = v;
            moving_mean.data()[c] = momentum * moving_mean.data()[c] + (S(1) - momentum) * m;
            moving_var.data()[c] = momentum * moving_var.data()[c] + (S(1) - momentum) * v;
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[c] = moving_mean.data()[c];
            var[c] = moving_var.data()[c];
        }
    }

    std::vector<S> out(x.numel());
    for (int c = 0; c < C; ++c) {
        const S inv = S(1) / std::sqrt(var[c] + eps_bn);
        const S g = scale.data()[c], b = shift.data()[c], m = mean[c];
        const S* xc = x.data().data() + c * plane;
        S* oc = out.data() + c * plane;
        for (int i = 0; i < plane; ++i) oc[i] = g * (xc[i] - m) * inv + b;
    }

    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        x.shape(), std::move(out), {x, scale, shift},
        [x, scale, shift, mean, var, mode, eps_bn, C, plane](Node& self) mutable {
            for (int c = 0; c < C; ++c) {
                const S inv = S(1) / std::sqrt(var[c] + eps_bn);
                const S g = scale.data()[c], m = mean[c];
                const S* xc = x.data().data() + c * plane;
                const S* gy = self.grad.data() + c * plane;
                if (scale.requires_grad()) {
                    S acc = 0;
                    for (int i = 0; i < plane; ++i) acc += gy[i] * (xc[i] - m) * inv;
                    scale.grad()[c] += acc;
                }
                if (shift.requires_grad()) {
                    S acc = 0;
                    for (int i = 0; i < plane; ++i) acc += gy[i];
                    shift.grad()[c] += acc;
                }
                if (!x.requires_grad()) continue;
                S* gx = x.grad().data() + c * plane;
                if (mode == BNMode::Infer) {
                    for (int i = 0; i < plane; ++i) gx[i] += gy[i] * g * inv;
                } else {
                    // Backprop through the batch statistics themselves.
                    S sum_gy = 0, sum_gy_xhat = 0;
                    for (int i = 0; i < plane; ++i) {
                        sum_gy += gy[i];
                        sum_gy_xhat += gy[i] * (xc[i] - m) * inv;
                    }
                    const S n = S(plane);
                    for (int i = 0; i < plane; ++i) {
                        const S xhat = (xc[i] - m) * inv;
                        gx[i] += g * inv / n * (n * gy[i] - sum_gy - xhat * sum_gy_xhat);
                    }
                }
            }
        });
}

/// Mean squared error over all elements; returns a scalar tensor.
template <class S>
Tensor<S> mse_loss(Tensor<S> pred, Tensor<S> target) {
    detail::require(pred.shape() == target.shape(),
                    "mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                        shape_str(target.shape()));
    const std::size_t n = pred.numel();
    S acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const S d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    acc /= S(n);
    if (!std::isfinite(static_cast<double>(acc)))
        throw std::runtime_error("mse_loss: non-finite loss");
    using Node = typename Tensor<S>::Node;
    return Tensor<S>::make_result(
        {1}, {acc}, {pred, target},
        [pred, target, n](Node& self) mutable {
            const S g = self.grad[0] * S(2) / S(n);
            for (std::size_t i = 0; i < n; ++i) {
                const S d = pred.data()[i] - target.data()[i];
                if (pred.requires_grad()) pred.grad()[i] += g * d;
                if (target.requires_grad()) target.grad()[i] -= g * d;
            }
        });
}

}  // namespace ddnet
