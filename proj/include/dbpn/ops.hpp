// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable operators.  Each op computes its forward result and, when a
// tape is active and an input participates, records a closure that
// accumulates input gradients.  Gradient buffers are always accumulated into
// (+=), never overwritten; the tape handles zeroing of intermediates.
// See autodiff.hpp for the recording pattern (grad buffers are allocated
// before the closure captures its handles).

#include <cmath>
#include <vector>

#include "dbpn/autodiff.hpp"
#include "dbpn/conv.hpp"
#include "dbpn/tensor.hpp"

namespace dbpn {

// One convolution/deconvolution layer's parameters.  kernel is (A, B, f, f):
// used as a conv it maps B -> A channels, used as a deconv A -> B.  bias is
// kept as a (1, C, 1, 1) tensor so it rides the tape like any parameter; its
// length must match the producing op's output channel count.
template <class S>
struct ConvParams {
    Tensor4<S> kernel;
    Tensor4<S> bias;
    int stride = 1;
    int pad = 0;

    int f() const { return kernel.shape.h; }
    std::size_t param_count() const { return kernel.numel() + bias.numel(); }
};

// Parameters for `conv2d` mapping in_c -> out_c.
template <class S>
ConvParams<S> make_conv(int out_c, int in_c, int f, int st, int pd) {
    DBPN_CHECK(f >= 1 && st >= 1 && pd >= 0, "bad conv geometry f=", f, " st=", st, " pd=", pd);
    return ConvParams<S>{make_param<S>({out_c, in_c, f, f}), make_param<S>({1, out_c, 1, 1}), st, pd};
}

// Parameters for `conv_transpose2d` mapping in_c -> out_c.
template <class S>
ConvParams<S> make_deconv(int in_c, int out_c, int f, int st, int pd) {
    DBPN_CHECK(f >= 1 && st >= 1 && pd >= 0, "bad deconv geometry f=", f, " st=", st, " pd=", pd);
    return ConvParams<S>{make_param<S>({in_c, out_c, f, f}), make_param<S>({1, out_c, 1, 1}), st, pd};
}

namespace detail {
// Pre-backward bookkeeping shared by all ops; returns the tape iff recording.
template <class S>
Tape<S>* prep_record(bool part, Tensor4<S>& out, std::initializer_list<Tensor4<S>*> ins) {
    Tape<S>* tp = tape_for<S>(part);
    if (!tp) return nullptr;
    for (Tensor4<S>* in : ins)
        if (in->participates()) in->ensure_grad();
    out.on_tape = true;
    out.ensure_grad();
    return tp;
}
}  // namespace detail

template <class S>
Tensor4<S> conv2d(const Tensor4<S>& x, ConvParams<S>& p) {
    const Shape4 ks = p.kernel.shape;  // (A, B, f, f)
    DBPN_CHECK(ks.h == ks.w, "non-square kernel ", to_string(ks));
    DBPN_CHECK(x.shape.c == ks.c, "conv2d: input has ", x.shape.c,
               " channels, kernel expects ", ks.c);
    DBPN_CHECK(p.bias.numel() == static_cast<std::size_t>(ks.n),
               "conv2d: bias length ", p.bias.numel(), " != filters ", ks.n);
    auto g = detail::ConvGeom::from_img(ks.c, ks.n, ks.h, p.stride, p.pad,
                                        x.shape.h, x.shape.w);
    Tensor4<S> y(x.shape.n, g.A, g.gh, g.gw);
    detail::gather_batch(x.ptr(), x.shape.n, g, p.kernel.ptr(), y.ptr(), false);
    {  // add bias per output channel
        S* yp = y.ptr();
        const S* b = p.bias.ptr();
        const std::size_t plane = static_cast<std::size_t>(g.gh) * g.gw;
        for (int n = 0; n < x.shape.n; ++n)
            for (int a = 0; a < g.A; ++a) {
                const S bv = b[a];
                for (std::size_t i = 0; i < plane; ++i) *yp++ += bv;
            }
    }
    Tensor4<S> xc = x;
    if (auto* tp = detail::prep_record<S>(
            x.participates() || p.kernel.participates() || p.bias.participates(), y,
            {&xc, &p.kernel, &p.bias})) {
        Tensor4<S> kc = p.kernel, bc = p.bias;
        tp->record(y, [xc, kc, bc, y, g]() mutable {
            const S* dy = y.grad->data();
            if (xc.participates())
                detail::scatter_batch(dy, xc.shape.n, g, kc.ptr(), xc.grad->data());
            if (kc.participates())
                detail::kernel_grad_batch(dy, xc.ptr(), xc.shape.n, g, kc.grad->data());
            if (bc.participates()) {
                Tensor4<S> dyt = y;
                dyt.data = y.grad;  // gradient viewed with y's shape
                detail::bias_grad(dyt, bc.grad->data());
            }
        });
    }
    return y;
}

template <class S>
Tensor4<S> conv_transpose2d(const Tensor4<S>& x, ConvParams<S>& p) {
    const Shape4 ks = p.kernel.shape;  // (A, B, f, f); input has A channels
    DBPN_CHECK(ks.h == ks.w, "non-square kernel ", to_string(ks));
    DBPN_CHECK(x.shape.c == ks.n, "conv_transpose2d: input has ", x.shape.c,
               " channels, kernel expects ", ks.n);
    DBPN_CHECK(p.bias.numel() == static_cast<std::size_t>(ks.c),
               "conv_transpose2d: bias length ", p.bias.numel(), " != out channels ", ks.c);
    auto g = detail::ConvGeom::from_grid(ks.c, ks.n, ks.h, p.stride, p.pad,
                                         x.shape.h, x.shape.w);
    Tensor4<S> y(x.shape.n, g.B, g.H, g.W);
    {  // start from the bias, then scatter on top
        S* yp = y.ptr();
        const S* b = p.bias.ptr();
        const std::size_t plane = static_cast<std::size_t>(g.H) * g.W;
        for (int n = 0; n < x.shape.n; ++n)
            for (int c = 0; c < g.B; ++c) {
                const S bv = b[c];
                for (std::size_t i = 0; i < plane; ++i) *yp++ = bv;
            }
    }
    detail::scatter_batch(x.ptr(), x.shape.n, g, p.kernel.ptr(), y.ptr());
    Tensor4<S> xc = x;
    if (auto* tp = detail::prep_record<S>(
            x.participates() || p.kernel.participates() || p.bias.participates(), y,
            {&xc, &p.kernel, &p.bias})) {
        Tensor4<S> kc = p.kernel, bc = p.bias;
        tp->record(y, [xc, kc, bc, y, g]() mutable {
            const S* dy = y.grad->data();
            if (xc.participates())
                detail::gather_batch(dy, xc.shape.n, g, kc.ptr(), xc.grad->data(), true);
            if (kc.participates())
                detail::kernel_grad_batch(xc.ptr(), dy, xc.shape.n, g, kc.grad->data());
            if (bc.participates()) {
                Tensor4<S> dyt = y;
                dyt.data = y.grad;
                detail::bias_grad(dyt, bc.grad->data());
            }
        });
    }
    return y;
}

// PReLU with per-channel trainable slope (slopes: (1, C, 1, 1)).
template <class S>
Tensor4<S> prelu(const Tensor4<S>& x, Tensor4<S>& slopes) {
    DBPN_CHECK(slopes.numel() == static_cast<std::size_t>(x.shape.c),
               "prelu: ", slopes.numel(), " slopes for ", x.shape.c, " channels");
    Tensor4<S> y(x.shape);
    const std::size_t plane = static_cast<std::size_t>(x.shape.h) * x.shape.w;
    {
        const S* xp = x.ptr();
        const S* sp = slopes.ptr();
        S* yp = y.ptr();
        for (int n = 0; n < x.shape.n; ++n)
            for (int c = 0; c < x.shape.c; ++c) {
                const S a = sp[c];
                for (std::size_t i = 0; i < plane; ++i) {
                    const S v = *xp++;
                    *yp++ = v > S(0) ? v : a * v;
                }
            }
    }
    Tensor4<S> xc = x;
    if (auto* tp = detail::prep_record<S>(x.participates() || slopes.participates(), y,
                                          {&xc, &slopes})) {
        Tensor4<S> sc = slopes;
        tp->record(y, [xc, sc, y, plane]() mutable {
            const S* dy = y.grad->data();
            const S* xp = xc.ptr();
            const S* sp = sc.ptr();
            S* dx = xc.participates() ? xc.grad->data() : nullptr;
            S* ds = sc.participates() ? sc.grad->data() : nullptr;
            std::size_t k = 0;
            for (int n = 0; n < xc.shape.n; ++n)
                for (int c = 0; c < xc.shape.c; ++c) {
                    const S a = sp[c];
                    S dsc = S(0);
                    for (std::size_t i = 0; i < plane; ++i, ++k) {
                        const S v = xp[k];
                        if (dx) dx[k] += v > S(0) ? dy[k] : a * dy[k];
                        if (v < S(0)) dsc += v * dy[k];
                    }
                    if (ds) ds[c] += dsc;
                }
        });
    }
    return y;
}

template <class S>
Tensor4<S> concat_channels(const std::vector<Tensor4<S>>& xs) {
    DBPN_CHECK(!xs.empty(), "concat_channels: empty input list");
    const Shape4 s0 = xs[0].shape;
    int ctot = 0;
    bool part = false;
    for (const auto& x : xs) {
        DBPN_CHECK(x.shape.n == s0.n && x.shape.h == s0.h && x.shape.w == s0.w,
                   "concat_channels: mismatched shape ", to_string(x.shape),
                   " vs ", to_string(s0));
        ctot += x.shape.c;
        part = part || x.participates();
    }
    Tensor4<S> y(s0.n, ctot, s0.h, s0.w);
    const std::size_t plane = static_cast<std::size_t>(s0.h) * s0.w;
    for (int n = 0; n < s0.n; ++n) {
        S* dst = y.ptr() + static_cast<std::size_t>(n) * ctot * plane;
        for (const auto& x : xs) {
            const std::size_t sz = static_cast<std::size_t>(x.shape.c) * plane;
            std::memcpy(dst, x.ptr() + static_cast<std::size_t>(n) * sz, sz * sizeof(S));
            dst += sz;
        }
    }
    if (auto* tp = tape_for<S>(part)) {
        std::vector<Tensor4<S>> xc = xs;
        for (auto& x : xc)
            if (x.participates()) x.ensure_grad();
        y.on_tape = true;
        y.ensure_grad();
        tp->record(y, [xc, y, plane, ctot]() mutable {
            const S* dy = y.grad->data();
            for (int n = 0; n < y.shape.n; ++n) {
                const S* src = dy + static_cast<std::size_t>(n) * ctot * plane;
                for (auto& x : xc) {
                    const std::size_t sz = static_cast<std::size_t>(x.shape.c) * plane;
                    if (x.participates()) {
                        S* g = x.grad->data() + static_cast<std::size_t>(n) * sz;
                        for (std::size_t i = 0; i < sz; ++i) g[i] += src[i];
                    }
                    src += sz;
                }
            }
        });
    }
    return y;
}

namespace detail {
template <class S, class Fwd, class Bwd>
Tensor4<S> elementwise_pair(const Tensor4<S>& a, const Tensor4<S>& b, Fwd f, Bwd bk,
                            const char* name) {
    DBPN_CHECK(a.shape == b.shape, name, ": shape mismatch ", to_string(a.shape),
               " vs ", to_string(b.shape));
    Tensor4<S> y(a.shape);
    const std::size_t n = a.numel();
    {
        const S* ap = a.ptr();
        const S* bp = b.ptr();
        S* yp = y.ptr();
        for (std::size_t i = 0; i < n; ++i) yp[i] = f(ap[i], bp[i]);
    }
    Tensor4<S> ac = a, bc = b;
    if (auto* tp = prep_record<S>(a.participates() || b.participates(), y, {&ac, &bc})) {
        tp->record(y, [ac, bc, y, n, bk]() mutable {
            const S* dy = y.grad->data();
            S* da = ac.participates() ? ac.grad->data() : nullptr;
            S* db = bc.participates() ? bc.grad->data() : nullptr;
            for (std::size_t i = 0; i < n; ++i)
                bk(dy[i], da ? da + i : nullptr, db ? db + i : nullptr);
        });
    }
    return y;
}
}  // namespace detail

template <class S>
Tensor4<S> add(const Tensor4<S>& a, const Tensor4<S>& b) {
    return detail::elementwise_pair(
        a, b, [](S x, S y) { return x + y; },
        [](S dy, S* da, S* db) {
            if (da) *da += dy;
            if (db) *db += dy;
        },
        "add");
}

template <class S>
Tensor4<S> sub(const Tensor4<S>& a, const Tensor4<S>& b) {
    return detail::elementwise_pair(
        a, b, [](S x, S y) { return x - y; },
        [](S dy, S* da, S* db) {
            if (da) *da += dy;
            if (db) *db -= dy;
        },
        "sub");
}

// Mean absolute difference.  Subgradient at exact ties is 0.
template <class S>
Tensor4<S> l1_loss(const Tensor4<S>& pred, const Tensor4<S>& target) {
    DBPN_CHECK(pred.shape == target.shape, "l1_loss: shape mismatch ",
               to_string(pred.shape), " vs ", to_string(target.shape));
    const std::size_t n = pred.numel();
    DBPN_CHECK(n > 0, "l1_loss: empty tensors");
    const S* pp = pred.ptr();
    const S* tp0 = target.ptr();
    S acc = S(0);
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(pp[i] - tp0[i]);
    Tensor4<S> y(1, 1, 1, 1);
    (*y.data)[0] = acc / static_cast<S>(n);
    Tensor4<S> pc = pred, tc = target;
    if (auto* tp = detail::prep_record<S>(pred.participates() || target.participates(), y,
                                          {&pc, &tc})) {
        tp->record(y, [pc, tc, y, n]() mutable {
            const S g = (*y.grad)[0] / static_cast<S>(n);
            const S* pp = pc.ptr();
            const S* tp0 = tc.ptr();
            S* dp = pc.participates() ? pc.grad->data() : nullptr;
            S* dt = tc.participates() ? tc.grad->data() : nullptr;
            for (std::size_t i = 0; i < n; ++i) {
                const S d = pp[i] - tp0[i];
                const S s = d > S(0) ? g : (d < S(0) ? -g : S(0));
                if (dp) dp[i] += s;
                if (dt) dt[i] -= s;
            }
        });
    }
    return y;
}

template <class S>
Tensor4<S> mse_loss(const Tensor4<S>& pred, const Tensor4<S>& target) {
    DBPN_CHECK(pred.shape == target.shape, "mse_loss: shape mismatch ",
               to_string(pred.shape), " vs ", to_string(target.shape));
    const std::size_t n = pred.numel();
    DBPN_CHECK(n > 0, "mse_loss: empty tensors");
    const S* pp = pred.ptr();
    const S* tp0 = target.ptr();
    S acc = S(0);
    for (std::size_t i = 0; i < n; ++i) {
        const S d = pp[i] - tp0[i];
        acc += d * d;
    }
    Tensor4<S> y(1, 1, 1, 1);
    (*y.data)[0] = acc / static_cast<S>(n);
    Tensor4<S> pc = pred, tc = target;
    if (auto* tp = detail::prep_record<S>(pred.participates() || target.participates(), y,
                                          {&pc, &tc})) {
        tp->record(y, [pc, tc, y, n]() mutable {
            const S g = (*y.grad)[0] * S(2) / static_cast<S>(n);
            const S* pp = pc.ptr();
            const S* tp0 = tc.ptr();
            S* dp = pc.participates() ? pc.grad->data() : nullptr;
            S* dt = tc.participates() ? tc.grad->data() : nullptr;
            for (std::size_t i = 0; i < n; ++i) {
                const S d = g * (pp[i] - tp0[i]);
                if (dp) dp[i] += d;
                if (dt) dt[i] -= d;
            }
        });
    }
    return y;
}

// Sum of all elements (handy for gradient-flow tests).
template <class S>
Tensor4<S> sum_all(const Tensor4<S>& x) {
    const std::size_t n = x.numel();
    const S* xp = x.ptr();
    S acc = S(0);
    for (std::size_t i = 0; i < n; ++i) acc += xp[i];
    Tensor4<S> y(1, 1, 1, 1);
    (*y.data)[0] = acc;
    Tensor4<S> xc = x;
    if (auto* tp = detail::prep_record<S>(x.participates(), y, {&xc})) {
        tp->record(y, [xc, y, n]() mutable {
            const S g = (*y.grad)[0];
            S* dx = xc.grad->data();
            for (std::size_t i = 0; i < n; ++i) dx[i] += g;
        });
    }
    return y;
}

template <class S>
void backward(Tape<S>& tape, Tensor4<S>& loss) {
    tape.backward(loss);
}

}  // namespace dbpn
