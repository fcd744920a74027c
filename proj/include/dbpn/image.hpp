// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <vector>

#include "dbpn/common.hpp"
#include "dbpn/tensor.hpp"

namespace dbpn {

enum class Colorspace { RGB, Y };

// Planar (channel-major) float image, values nominally in [0,1].
struct ImagePlane {
    int h = 0, w = 0, c = 0;
    std::vector<float> v;  // c * h * w, plane after plane
    Colorspace cs = Colorspace::RGB;

    ImagePlane() = default;
    ImagePlane(int h_, int w_, int c_, Colorspace cs_)
        : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.f), cs(cs_) {}

    float* plane(int ch) { return v.data() + static_cast<std::size_t>(ch) * h * w; }
    const float* plane(int ch) const { return v.data() + static_cast<std::size_t>(ch) * h * w; }
    float& at(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
    const float& at(int ch, int y, int x) const {
        return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
    }

    void clamp01() {
        for (auto& x : v) x = std::clamp(x, 0.f, 1.f);
    }
};

// BT.601 studio-swing luma: Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255,
// computed on [0,1] inputs (the SR literature's "Y channel" convention).
inline ImagePlane rgb_to_y(const ImagePlane& img) {
    DBPN_CHECK(img.c == 3, "rgb_to_y: expected 3 channels, got ", img.c);
    ImagePlane out(img.h, img.w, 1, Colorspace::Y);
    const std::size_t n = static_cast<std::size_t>(img.h) * img.w;
    const float* r = img.plane(0);
    const float* g = img.plane(1);
    const float* b = img.plane(2);
    for (std::size_t i = 0; i < n; ++i)
        out.v[i] = (65.481f * r[i] + 128.553f * g[i] + 24.966f * b[i] + 16.f) / 255.f;
    return out;
}

// Pass-through for already-luma images, conversion otherwise.
inline ImagePlane to_luma(const ImagePlane& img) {
    return img.c == 1 ? img : rgb_to_y(img);
}

inline ImagePlane crop(const ImagePlane& img, int y0, int x0, int ch, int cw) {
    DBPN_CHECK(y0 >= 0 && x0 >= 0 && y0 + ch <= img.h && x0 + cw <= img.w,
               "crop ", ch, "x", cw, "+", y0, "+", x0, " outside ", img.h, "x", img.w);
    ImagePlane out(ch, cw, img.c, img.cs);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < ch; ++y)
            std::copy_n(&img.at(c, y0 + y, x0), cw, &out.at(c, y, 0));
    return out;
}

// Top-left crop to dimensions divisible by s.
inline ImagePlane crop_to_multiple(const ImagePlane& img, int s) {
    const int ch = img.h - img.h % s, cw = img.w - img.w % s;
    DBPN_CHECK(ch > 0 && cw > 0, "image ", img.h, "x", img.w, " smaller than factor ", s);
    if (ch == img.h && cw == img.w) return img;
    return crop(img, 0, 0, ch, cw);
}

// Image <-> single-batch tensor bridges for inference/training.
template <class S>
Tensor4<S> to_tensor(const ImagePlane& img) {
    Tensor4<S> t(1, img.c, img.h, img.w);
    for (std::size_t i = 0; i < img.v.size(); ++i) (*t.data)[i] = static_cast<S>(img.v[i]);
    return t;
}

template <class S>
ImagePlane from_tensor(const Tensor4<S>& t, Colorspace cs, int batch_index = 0) {
    DBPN_CHECK(batch_index < t.shape.n, "batch index ", batch_index, " out of range");
    ImagePlane img(t.shape.h, t.shape.w, t.shape.c, cs);
    const std::size_t per = img.v.size();
    const S* src = t.ptr() + static_cast<std::size_t>(batch_index) * per;
    for (std::size_t i = 0; i < per; ++i) img.v[i] = static_cast<float>(src[i]);
    return img;
}

}  // namespace dbpn
