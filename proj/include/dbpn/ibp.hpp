// SPDX-License-Identifier: Apache-2.0
#pragma once

// Classical single-image iterative back-projection:
//   sr <- upscale(lr)
//   repeat: lo <- downscale(blur(sr)); e <- lr - lo; sr <- sr + upscale(e)
// with a fixed blur stencil and bicubic resampling both ways.

#include <vector>

#include "dbpn/resample.hpp"

namespace dbpn {

enum class BackProjKernel { Bicubic };

struct IbpConfig {
    int scale = 2;                   // in {2,4,8}
    std::vector<double> blur;        // DC-preserving stencil (entries sum to 1)
    int blur_h = 0, blur_w = 0;
    BackProjKernel p = BackProjKernel::Bicubic;
    int iterations = 10;
    double tolerance = 0.0;          // early stop on ||e||_2; 0 = full budget
};

// Outer product of normalized 1-D Gaussian taps; sums to 1 by construction.
inline void set_gaussian_blur(IbpConfig& cfg, double sigma) {
    const auto k = gaussian_taps(sigma);
    const int n = static_cast<int>(k.size());
    cfg.blur.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cfg.blur[static_cast<std::size_t>(i) * n + j] = k[i] * k[j];
    cfg.blur_h = cfg.blur_w = n;
}

inline IbpConfig make_ibp_config(int scale, double sigma = -1.0, int iterations = 10,
                                 double tolerance = 0.0) {
    DBPN_CHECK(scale == 2 || scale == 4 || scale == 8, "ibp: scale must be 2, 4 or 8, got ", scale);
    DBPN_CHECK(iterations >= 1, "ibp: need at least one iteration");
    IbpConfig cfg;
    cfg.scale = scale;
    cfg.iterations = iterations;
    cfg.tolerance = tolerance;
    set_gaussian_blur(cfg, sigma > 0.0 ? sigma : scale / 2.0);
    return cfg;
}

struct IbpResult {
    ImagePlane sr;
    std::vector<double> trace;  // ||e||_2 per executed iteration
};

inline IbpResult ibp_run(const ImagePlane& lr, const IbpConfig& cfg) {
    DBPN_CHECK(lr.h > 0 && lr.w > 0, "ibp: empty input image");
    DBPN_CHECK(!cfg.blur.empty() && cfg.blur_h % 2 == 1 && cfg.blur_w % 2 == 1,
               "ibp: config has no valid blur stencil");
    const double s = cfg.scale;
    auto upscale = [&](const ImagePlane& x) { return resize_bicubic(x, s, false); };
    auto downscale = [&](const ImagePlane& x) { return resize_bicubic(x, 1.0 / s, false); };

    IbpResult res;
    res.sr = upscale(lr);
    for (int it = 0; it < cfg.iterations; ++it) {
        const ImagePlane lo = downscale(convolve2d(res.sr, cfg.blur, cfg.blur_h, cfg.blur_w));
        DBPN_CHECK(lo.h == lr.h && lo.w == lr.w && lo.c == lr.c,
                   "ibp: downscale produced ", lo.h, "x", lo.w, " for LR ", lr.h, "x", lr.w);
        ImagePlane e(lr.h, lr.w, lr.c, lr.cs);
        double sse = 0.0;
        for (std::size_t i = 0; i < e.v.size(); ++i) {
            e.v[i] = lr.v[i] - lo.v[i];
            sse += static_cast<double>(e.v[i]) * e.v[i];
        }
        res.trace.push_back(std::sqrt(sse));
        if (cfg.tolerance > 0.0 && res.trace.back() <= cfg.tolerance) break;
        const ImagePlane up_e = upscale(e);
        for (std::size_t i = 0; i < res.sr.v.size(); ++i) res.sr.v[i] += up_e.v[i];
    }
    res.sr.clamp01();
    return res;
}

}  // namespace dbpn
