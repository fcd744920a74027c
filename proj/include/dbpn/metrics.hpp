// SPDX-License-Identifier: Apache-2.0
#pragma once

// PSNR and SSIM under the SR evaluation protocol: compare on the luminance
// channel, cropping `scale` pixels off every border first.

#include <cmath>
#include <limits>

#include "dbpn/image.hpp"

namespace dbpn {

struct EvalProtocol {
    int scale = 1;        // boundary crop in pixels (one per scale factor)
    bool y_only = true;   // convert RGB to luma before comparing
    double peak = 1.0;

    static EvalProtocol for_scale(int s, bool y = true) { return EvalProtocol{s, y, 1.0}; }
};

namespace detail {

inline ImagePlane eval_view(const ImagePlane& img, const EvalProtocol& p) {
    ImagePlane v = p.y_only ? to_luma(img) : img;
    const int cr = p.scale;
    if (cr > 0) {
        DBPN_CHECK(cr < (std::min(v.h, v.w) + 1) / 2,
                   "crop ", cr, " too large for ", v.h, "x", v.w, " image");
        v = crop(v, cr, cr, v.h - 2 * cr, v.w - 2 * cr);
    }
    return v;
}

inline void check_same_dims(const ImagePlane& a, const ImagePlane& b, const char* what) {
    DBPN_CHECK(a.h == b.h && a.w == b.w && a.c == b.c, what, ": dimension mismatch ",
               a.h, "x", a.w, "x", a.c, " vs ", b.h, "x", b.w, "x", b.c);
}

}  // namespace detail

// 10*log10(peak^2 / MSE); identical inputs yield +infinity (the caller
// formats it as "inf" rather than capping).
inline double psnr(const ImagePlane& a, const ImagePlane& b,
                   const EvalProtocol& proto = {}) {
    detail::check_same_dims(a, b, "psnr");
    const ImagePlane va = detail::eval_view(a, proto);
    const ImagePlane vb = detail::eval_view(b, proto);
    double sse = 0.0;
    for (std::size_t i = 0; i < va.v.size(); ++i) {
        const double d = static_cast<double>(va.v[i]) - vb.v[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(va.v.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(proto.peak * proto.peak / mse);
}

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// valid-region windows only (no padding), matching the reference formulation.
inline double ssim(const ImagePlane& a, const ImagePlane& b,
                   const EvalProtocol& proto = {}) {
    detail::check_same_dims(a, b, "ssim");
    const ImagePlane va = detail::eval_view(a, proto);
    const ImagePlane vb = detail::eval_view(b, proto);
    constexpr int W = 11, R = W / 2;
    DBPN_CHECK(va.h >= W && va.w >= W, "ssim: cropped image ", va.h, "x", va.w,
               " smaller than the 11x11 window");
    double win[W * W];
    {
        const double sigma = 1.5;
        double sum = 0.0;
        for (int y = 0; y < W; ++y)
            for (int x = 0; x < W; ++x) {
                const double dy = y - R, dx = x - R;
                win[y * W + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                sum += win[y * W + x];
            }
        for (auto& v : win) v /= sum;
    }
    const double C1 = (0.01 * proto.peak) * (0.01 * proto.peak);
    const double C2 = (0.03 * proto.peak) * (0.03 * proto.peak);
    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < va.c; ++c) {
        const float* pa = va.plane(c);
        const float* pb = vb.plane(c);
        for (int y = 0; y + W <= va.h; ++y)
            for (int x = 0; x + W <= va.w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < W; ++i)
                    for (int j = 0; j < W; ++j) {
                        const double wv = win[i * W + j];
                        const double xa = pa[(y + i) * static_cast<std::size_t>(va.w) + x + j];
                        const double xb = pb[(y + i) * static_cast<std::size_t>(va.w) + x + j];
                        ma += wv * xa;
                        mb += wv * xb;
                        saa += wv * xa * xa;
                        sbb += wv * xb * xb;
                        sab += wv * xa * xb;
                    }
                const double va2 = saa - ma * ma;
                const double vb2 = sbb - mb * mb;
                const double cov = sab - ma * mb;
                total += ((2 * ma * mb + C1) * (2 * cov + C2)) /
                         ((ma * ma + mb * mb + C1) * (va2 + vb2 + C2));
                ++count;
            }
    }
    return total / static_cast<double>(count);
}

}  // namespace dbpn
