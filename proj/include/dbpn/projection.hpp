// SPDX-License-Identifier: Apache-2.0
#pragma once

// Learned up-/down-projection units.  An up unit lifts nR LR features to HR
// and corrects them with the back-projected residual:
//   H0 = act(deconv_p(L));  L0 = act(conv_g(H0));  e = L0 - L;
//   H1 = act(deconv_q(e));  H  = H0 + H1
// The down unit mirrors this (conv, deconv, conv).  Every layer output is
// passed through its own per-channel PReLU before the arithmetic that
// consumes it; the final sum has no activation.  The "without error
// feedback" ablation replaces the three layers with the single first one.

#include <optional>

#include "dbpn/init.hpp"
#include "dbpn/ops.hpp"

namespace dbpn {

struct ScalePreset {
    int s = 2, f = 6, st = 2, pd = 2;
};

// The three published scale geometries; each one round-trips spatial dims
// exactly (deconv multiplies by s, conv divides by s).
inline ScalePreset scale_preset(int s) {
    switch (s) {
        case 2: return {2, 6, 2, 2};
        case 4: return {4, 8, 4, 2};
        case 8: return {8, 12, 8, 2};
        default: break;
    }
    throw DimError(msg_cat("unsupported scale factor ", s, " (expected 2, 4 or 8)"));
}

template <class S>
struct ProjectionUnit {
    bool up = true;
    bool error_feedback = true;
    int scale = 2;
    int nR = 0;
    // Main layers.  up: deconv / conv / deconv; down: conv / deconv / conv.
    // With error_feedback off only l1/s1 exist.
    ConvParams<S> l1, l2, l3;
    Tensor4<S> s1, s2, s3;  // PReLU slopes per layer
    // 1x1 reduction applied by dense_project when the concatenated input is
    // wider than nR.
    std::optional<ConvParams<S>> bottleneck;
    Tensor4<S> bottleneck_slope;
};

template <class S>
Tensor4<S> make_slopes(int channels) {
    Tensor4<S> t = make_param<S>({1, channels, 1, 1});
    t.fill(S(0.25));  // common PReLU starting slope
    return t;
}

// bottleneck_in = 0 for a plain unit, else the concatenated channel count.
template <class S>
ProjectionUnit<S> make_projection_unit(bool up, int nR, int scale, Rng& rng,
                                       bool error_feedback = true, int bottleneck_in = 0) {
    const ScalePreset p = scale_preset(scale);
    ProjectionUnit<S> u;
    u.up = up;
    u.error_feedback = error_feedback;
    u.scale = scale;
    u.nR = nR;
    auto dc = [&] { return make_deconv<S>(nR, nR, p.f, p.st, p.pd); };
    auto cv = [&] { return make_conv<S>(nR, nR, p.f, p.st, p.pd); };
    u.l1 = up ? dc() : cv();
    he_init(u.l1, rng);
    u.s1 = make_slopes<S>(nR);
    if (error_feedback) {
        u.l2 = up ? cv() : dc();
        u.l3 = up ? dc() : cv();
        he_init(u.l2, rng);
        he_init(u.l3, rng);
        u.s2 = make_slopes<S>(nR);
        u.s3 = make_slopes<S>(nR);
    }
    if (bottleneck_in > 0) {
        DBPN_CHECK(bottleneck_in > nR, "bottleneck for ", bottleneck_in,
                   " channels is pointless at nR=", nR);
        u.bottleneck = make_conv<S>(nR, bottleneck_in, 1, 1, 0);
        he_init(*u.bottleneck, rng);
        u.bottleneck_slope = make_slopes<S>(nR);
    }
    return u;
}

// Single-layer ablation stage: one deconv (up) or conv (down) plus PReLU.
template <class S>
Tensor4<S> plain_sample_block(bool up, ConvParams<S>& params, Tensor4<S>& slopes,
                              const Tensor4<S>& x) {
    Tensor4<S> y = up ? conv_transpose2d(x, params) : conv2d(x, params);
    return prelu(y, slopes);
}

template <class S>
Tensor4<S> up_project(ProjectionUnit<S>& u, const Tensor4<S>& L) {
    DBPN_CHECK(u.up, "up_project on a down unit");
    DBPN_CHECK(L.shape.c == u.nR, "up_project: input has ", L.shape.c,
               " channels, unit expects ", u.nR);
    if (!u.error_feedback) return plain_sample_block(true, u.l1, u.s1, L);
    Tensor4<S> h0 = prelu(conv_transpose2d(L, u.l1), u.s1);
    Tensor4<S> l0 = prelu(conv2d(h0, u.l2), u.s2);
    Tensor4<S> e = sub(l0, L);
    Tensor4<S> h1 = prelu(conv_transpose2d(e, u.l3), u.s3);
    return add(h0, h1);
}

template <class S>
Tensor4<S> down_project(ProjectionUnit<S>& u, const Tensor4<S>& H) {
    DBPN_CHECK(!u.up, "down_project on an up unit");
    DBPN_CHECK(H.shape.c == u.nR, "down_project: input has ", H.shape.c,
               " channels, unit expects ", u.nR);
    DBPN_CHECK(H.shape.h % u.scale == 0 && H.shape.w % u.scale == 0,
               "down_project: ", H.shape.h, "x", H.shape.w,
               " not divisible by scale ", u.scale);
    if (!u.error_feedback) return plain_sample_block(false, u.l1, u.s1, H);
    Tensor4<S> l0 = prelu(conv2d(H, u.l1), u.s1);
    Tensor4<S> h0 = prelu(conv_transpose2d(l0, u.l2), u.s2);
    Tensor4<S> e = sub(h0, H);
    Tensor4<S> l1g = prelu(conv2d(e, u.l3), u.s3);
    return add(l0, l1g);
}

// Dense wiring: concatenate prior same-resolution outputs, reduce through the
// 1x1 bottleneck when present, then project.
template <class S>
Tensor4<S> dense_project(ProjectionUnit<S>& u, const std::vector<Tensor4<S>>& priors) {
    DBPN_CHECK(!priors.empty(), "dense_project: no inputs");
    Tensor4<S> x = priors.size() == 1 ? priors[0] : concat_channels(priors);
    if (u.bottleneck) {
        DBPN_CHECK(x.shape.c == u.bottleneck->kernel.shape.c,
                   "dense_project: concatenated ", x.shape.c,
                   " channels but bottleneck expects ", u.bottleneck->kernel.shape.c);
        x = prelu(conv2d(x, *u.bottleneck), u.bottleneck_slope);
    } else {
        DBPN_CHECK(x.shape.c == u.nR, "dense_project: ", x.shape.c,
                   " channels with no bottleneck (unit expects ", u.nR, ")");
    }
    return u.up ? up_project(u, x) : down_project(u, x);
}

template <class S>
std::size_t unit_param_count(const ProjectionUnit<S>& u, bool include_slopes = true) {
    std::size_t n = u.l1.param_count();
    if (include_slopes) n += u.s1.numel();
    if (u.error_feedback) {
        n += u.l2.param_count() + u.l3.param_count();
        if (include_slopes) n += u.s2.numel() + u.s3.numel();
    }
    if (u.bottleneck) {
        n += u.bottleneck->param_count();
        if (include_slopes) n += u.bottleneck_slope.numel();
    }
    return n;
}

}  // namespace dbpn
