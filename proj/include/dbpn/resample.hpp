// SPDX-License-Identifier: Apache-2.0
#pragma once

// Separable bicubic resampling (Keys kernel), Gaussian blur, and small
// 2-D stencil convolution.  Conventions:
//   - pixel centers at i + 0.5: src_x = (dst_x + 0.5)/scale - 0.5
//   - clamp-to-edge everywhere
//   - downscale with antialias stretches the kernel by 1/scale and
//     renormalizes per output pixel (the degradation convention used by the
//     common SR benchmark tooling); upscale never antialiases.

#include <cmath>
#include <vector>

#include "dbpn/image.hpp"

namespace dbpn {

// Keys piecewise-cubic kernel with parameter a; support [-2, 2].
inline double bicubic_kernel(double x, double a = -0.5) {
    x = std::abs(x);
    if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

namespace detail {

struct ResampleTap {
    int lo = 0;                 // first source index (clamped later)
    std::vector<double> w;      // weights, renormalized to sum 1
};

// Precompute taps for one axis: src length n -> dst length m at `scale`.
inline std::vector<ResampleTap> bicubic_taps(int n, int m, double scale, bool antialias) {
    const bool shrink = scale < 1.0 && antialias;
    const double kscale = shrink ? scale : 1.0;    // kernel stretch for AA
    const double support = 2.0 / kscale;
    std::vector<ResampleTap> taps(m);
    for (int j = 0; j < m; ++j) {
        const double center = (j + 0.5) / scale - 0.5;
        int lo = static_cast<int>(std::floor(center - support)) + 1;
        int hi = static_cast<int>(std::floor(center + support));
        if (hi < lo) hi = lo;
        ResampleTap t;
        t.lo = lo;
        t.w.resize(hi - lo + 1);
        double sum = 0.0;
        for (int k = lo; k <= hi; ++k) {
            const double wv = bicubic_kernel((center - k) * kscale);
            t.w[k - lo] = wv;
            sum += wv;
        }
        // Renormalize: exact partition of unity is lost at stretched/edge taps.
        if (sum != 0.0)
            for (auto& wv : t.w) wv /= sum;
        taps[j] = std::move(t);
    }
    return taps;
}

// Resample one axis of a plane; `which` = 0 rows stay, columns resampled.
inline void resample_axis(const float* src, int h, int w, float* dst, int out_len,
                          const std::vector<ResampleTap>& taps, bool horizontal) {
    if (horizontal) {
        for (int y = 0; y < h; ++y) {
            const float* row = src + static_cast<std::size_t>(y) * w;
            float* orow = dst + static_cast<std::size_t>(y) * out_len;
            for (int x = 0; x < out_len; ++x) {
                const auto& t = taps[x];
                double acc = 0.0;
                for (std::size_t k = 0; k < t.w.size(); ++k) {
                    int idx = t.lo + static_cast<int>(k);
                    idx = idx < 0 ? 0 : (idx >= w ? w - 1 : idx);
                    acc += t.w[k] * row[idx];
                }
                orow[x] = static_cast<float>(acc);
            }
        }
    } else {
        for (int y = 0; y < out_len; ++y) {
            const auto& t = taps[y];
            float* orow = dst + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::size_t k = 0; k < t.w.size(); ++k) {
                    int idx = t.lo + static_cast<int>(k);
                    idx = idx < 0 ? 0 : (idx >= h ? h - 1 : idx);
                    acc += t.w[k] * src[static_cast<std::size_t>(idx) * w + x];
                }
                orow[x] = static_cast<float>(acc);
            }
        }
    }
}

inline int out_dim(int n, double scale, const char* what) {
    if (scale >= 1.0) return static_cast<int>(std::ceil(n * scale));
    const double inv = 1.0 / scale;
    const double r = std::round(inv);
    if (std::abs(inv - r) < 1e-9) {
        const int s = static_cast<int>(r);
        DBPN_CHECK(n % s == 0, what, " dimension ", n, " not divisible by downscale factor ", s);
        return n / s;
    }
    return static_cast<int>(std::ceil(n * scale));
}

}  // namespace detail

inline ImagePlane resize_bicubic(const ImagePlane& img, double scale, bool antialias) {
    DBPN_CHECK(scale > 0.0, "resize_bicubic: scale must be positive, got ", scale);
    if (scale == 1.0) return img;
    const int oh = detail::out_dim(img.h, scale, "height");
    const int ow = detail::out_dim(img.w, scale, "width");
    const auto xt = detail::bicubic_taps(img.w, ow, scale, antialias);
    const auto yt = detail::bicubic_taps(img.h, oh, scale, antialias);
    ImagePlane out(oh, ow, img.c, img.cs);
    std::vector<float> tmp(static_cast<std::size_t>(img.h) * ow);
    for (int c = 0; c < img.c; ++c) {
        detail::resample_axis(img.plane(c), img.h, img.w, tmp.data(), ow, xt, true);
        detail::resample_axis(tmp.data(), img.h, ow, out.plane(c), oh, yt, false);
    }
    return out;
}

// Resize to an explicit output size (per-axis scale = out/in); antialias
// applies to whichever axes shrink.
inline ImagePlane resize_bicubic_to(const ImagePlane& img, int oh, int ow, bool antialias) {
    DBPN_CHECK(oh >= 1 && ow >= 1, "resize: bad target size ", oh, "x", ow);
    if (oh == img.h && ow == img.w) return img;
    const double sx = static_cast<double>(ow) / img.w;
    const double sy = static_cast<double>(oh) / img.h;
    const auto xt = detail::bicubic_taps(img.w, ow, sx, antialias);
    const auto yt = detail::bicubic_taps(img.h, oh, sy, antialias);
    ImagePlane out(oh, ow, img.c, img.cs);
    std::vector<float> tmp(static_cast<std::size_t>(img.h) * ow);
    for (int c = 0; c < img.c; ++c) {
        detail::resample_axis(img.plane(c), img.h, img.w, tmp.data(), ow, xt, true);
        detail::resample_axis(tmp.data(), img.h, ow, out.plane(c), oh, yt, false);
    }
    return out;
}

// Normalized 1-D Gaussian samples, radius ceil(3 sigma).
inline std::vector<double> gaussian_taps(double sigma) {
    DBPN_CHECK(sigma > 0.0, "gaussian blur: sigma must be positive, got ", sigma);
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        sum += k[i + r];
    }
    for (auto& v : k) v /= sum;
    return k;
}

inline ImagePlane gaussian_blur(const ImagePlane& img, double sigma) {
    const auto k = gaussian_taps(sigma);
    const int r = static_cast<int>(k.size() / 2);
    ImagePlane out(img.h, img.w, img.c, img.cs);
    std::vector<float> tmp(static_cast<std::size_t>(img.h) * img.w);
    for (int c = 0; c < img.c; ++c) {
        const float* src = img.plane(c);
        for (int y = 0; y < img.h; ++y)  // horizontal pass
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    int ix = x + i;
                    ix = ix < 0 ? 0 : (ix >= img.w ? img.w - 1 : ix);
                    acc += k[i + r] * src[static_cast<std::size_t>(y) * img.w + ix];
                }
                tmp[static_cast<std::size_t>(y) * img.w + x] = static_cast<float>(acc);
            }
        float* dst = out.plane(c);
        for (int y = 0; y < img.h; ++y)  // vertical pass
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    int iy = y + i;
                    iy = iy < 0 ? 0 : (iy >= img.h ? img.h - 1 : iy);
                    acc += k[i + r] * tmp[static_cast<std::size_t>(iy) * img.w + x];
                }
                dst[static_cast<std::size_t>(y) * img.w + x] = static_cast<float>(acc);
            }
    }
    return out;
}

// Dense 2-D stencil convolution with clamp-to-edge (used for the
// back-projection blur, whose kernel is a stored stencil).
inline ImagePlane convolve2d(const ImagePlane& img, const std::vector<double>& stencil,
                             int kh, int kw) {
    DBPN_CHECK(static_cast<std::size_t>(kh) * kw == stencil.size() && kh % 2 == 1 && kw % 2 == 1,
               "convolve2d: stencil must be odd-sized, got ", kh, "x", kw);
    const int ry = kh / 2, rx = kw / 2;
    ImagePlane out(img.h, img.w, img.c, img.cs);
    for (int c = 0; c < img.c; ++c) {
        const float* src = img.plane(c);
        float* dst = out.plane(c);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -ry; i <= ry; ++i) {
                    int iy = y + i;
                    iy = iy < 0 ? 0 : (iy >= img.h ? img.h - 1 : iy);
                    for (int j = -rx; j <= rx; ++j) {
                        int ix = x + j;
                        ix = ix < 0 ? 0 : (ix >= img.w ? img.w - 1 : ix);
                        acc += stencil[(i + ry) * static_cast<std::size_t>(kw) + (j + rx)] *
                               src[static_cast<std::size_t>(iy) * img.w + ix];
                    }
                }
                dst[static_cast<std::size_t>(y) * img.w + x] = static_cast<float>(acc);
            }
    }
    return out;
}

// Antialiased bicubic downscale by exactly 1/s, cropping to a multiple of s
// first (top-left anchored).
inline ImagePlane degrade(const ImagePlane& hr, int s) {
    DBPN_CHECK(s >= 1, "degrade: bad scale ", s);
    ImagePlane cropped = crop_to_multiple(hr, s);
    if (s == 1) return cropped;
    return resize_bicubic(cropped, 1.0 / s, /*antialias=*/true);
}

}  // namespace dbpn
