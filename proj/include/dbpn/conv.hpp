// SPDX-License-Identifier: Apache-2.0
#pragma once

// Convolution compute core: im2col/col2im + GEMM (Eigen).  No autodiff here;
// ops.hpp wraps these with tape recording.
//
// Kernel storage follows the (A, B, f, f) convention:
//   conv2d           maps B channels -> A channels   (A = filter count)
//   conv_transpose2d maps A channels -> B channels
// so the two ops with the *same* kernel tensor are exact adjoints of each
// other, which the tests pin via the inner-product identity.
//
// Geometry vocabulary below: the "grid" side is the small raster (conv
// output / deconv input), the "img" side is the large raster.  They are
// linked by  iy = gy*st + ky - pd.

#include <Eigen/Core>
#include <cstring>

#include "dbpn/tensor.hpp"

namespace dbpn {

// Caps the GEMM backend's parallelism; 1 is the deterministic reference.
inline void set_compute_threads(int n) {
    DBPN_CHECK(n >= 1, "thread count must be >= 1, got ", n);
    Eigen::setNbThreads(n);
}

}  // namespace dbpn

namespace dbpn::detail {

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapRM = Eigen::Map<MatRM<S>>;
template <class S>
using CMapRM = Eigen::Map<const MatRM<S>>;

struct ConvGeom {
    int B = 0, A = 0, f = 0, st = 1, pd = 0;
    int H = 0, W = 0;    // img side
    int gh = 0, gw = 0;  // grid side

    static ConvGeom from_img(int B, int A, int f, int st, int pd, int H, int W) {
        ConvGeom g{B, A, f, st, pd, H, W, 0, 0};
        DBPN_CHECK(H + 2 * pd >= f && W + 2 * pd >= f,
                   "conv input ", H, "x", W, " too small for f=", f, " pd=", pd);
        g.gh = (H + 2 * pd - f) / st + 1;
        g.gw = (W + 2 * pd - f) / st + 1;
        return g;
    }
    static ConvGeom from_grid(int B, int A, int f, int st, int pd, int gh, int gw) {
        ConvGeom g{B, A, f, st, pd, 0, 0, gh, gw};
        g.H = (gh - 1) * st - 2 * pd + f;
        g.W = (gw - 1) * st - 2 * pd + f;
        DBPN_CHECK(g.H >= 1 && g.W >= 1, "deconv output would be ", g.H, "x", g.W,
                   " (grid ", gh, "x", gw, ", f=", f, ", st=", st, ", pd=", pd, ")");
        return g;
    }
    int P() const { return gh * gw; }
    int Bff() const { return B * f * f; }
};

// col(r, p) for r = (b,ky,kx), p = (gy,gx): img[b][gy*st+ky-pd][gx*st+kx-pd],
// zero outside.  img points at one image of B*H*W values.
template <class S>
void im2col(const S* img, const ConvGeom& g, S* col) {
    const int P = g.P();
    for (int b = 0; b < g.B; ++b) {
        const S* plane = img + static_cast<std::size_t>(b) * g.H * g.W;
        for (int ky = 0; ky < g.f; ++ky) {
            for (int kx = 0; kx < g.f; ++kx) {
                S* row = col + (static_cast<std::size_t>(b) * g.f * g.f + ky * g.f + kx) * P;
                const int off = kx - g.pd;
                // gx range with 0 <= gx*st + off < W
                int lo = off < 0 ? (-off + g.st - 1) / g.st : 0;
                int hi = (g.W - 1 - off) / g.st + 1;
                if (hi > g.gw) hi = g.gw;
                if (lo > hi) lo = hi;
                for (int gy = 0; gy < g.gh; ++gy) {
                    S* dst = row + static_cast<std::size_t>(gy) * g.gw;
                    const int iy = gy * g.st + ky - g.pd;
                    if (iy < 0 || iy >= g.H) {
                        std::memset(dst, 0, sizeof(S) * g.gw);
                        continue;
                    }
                    const S* src = plane + static_cast<std::size_t>(iy) * g.W;
                    if (lo > 0) std::memset(dst, 0, sizeof(S) * lo);
                    for (int gx = lo; gx < hi; ++gx) dst[gx] = src[gx * g.st + off];
                    if (hi < g.gw) std::memset(dst + hi, 0, sizeof(S) * (g.gw - hi));
                }
            }
        }
    }
}

// Adjoint of im2col: img[b][...] += col(r, p), skipping out-of-bounds taps.
template <class S>
void col2im_add(const S* col, const ConvGeom& g, S* img) {
    const int P = g.P();
    for (int b = 0; b < g.B; ++b) {
        S* plane = img + static_cast<std::size_t>(b) * g.H * g.W;
        for (int ky = 0; ky < g.f; ++ky) {
            for (int kx = 0; kx < g.f; ++kx) {
                const S* row = col + (static_cast<std::size_t>(b) * g.f * g.f + ky * g.f + kx) * P;
                const int off = kx - g.pd;
                int lo = off < 0 ? (-off + g.st - 1) / g.st : 0;
                int hi = (g.W - 1 - off) / g.st + 1;
                if (hi > g.gw) hi = g.gw;
                if (lo > hi) lo = hi;
                for (int gy = 0; gy < g.gh; ++gy) {
                    const int iy = gy * g.st + ky - g.pd;
                    if (iy < 0 || iy >= g.H) continue;
                    const S* src = row + static_cast<std::size_t>(gy) * g.gw;
                    S* dst = plane + static_cast<std::size_t>(iy) * g.W;
                    for (int gx = lo; gx < hi; ++gx) dst[gx * g.st + off] += src[gx];
                }
            }
        }
    }
}

// grid_n (+)= K * im2col(img_n)  for every image in the batch.
// K: (A, Bff) row-major, i.e. the (A,B,f,f) tensor buffer as-is.
template <class S>
void gather_batch(const S* img, int N, const ConvGeom& g, const S* K, S* grid,
                  bool accumulate) {
    const int P = g.P(), Bff = g.Bff();
    std::vector<S> col(static_cast<std::size_t>(Bff) * P);
    CMapRM<S> Km(K, g.A, Bff);
    for (int n = 0; n < N; ++n) {
        im2col(img + static_cast<std::size_t>(n) * g.B * g.H * g.W, g, col.data());
        CMapRM<S> colm(col.data(), Bff, P);
        MapRM<S> out(grid + static_cast<std::size_t>(n) * g.A * P, g.A, P);
        if (accumulate)
            out.noalias() += Km * colm;
        else
            out.noalias() = Km * colm;
    }
}

// img_n += col2im(K^T * grid_n)  for every image in the batch.
template <class S>
void scatter_batch(const S* grid, int N, const ConvGeom& g, const S* K, S* img) {
    const int P = g.P(), Bff = g.Bff();
    std::vector<S> col(static_cast<std::size_t>(Bff) * P);
    CMapRM<S> Km(K, g.A, Bff);
    for (int n = 0; n < N; ++n) {
        CMapRM<S> gm(grid + static_cast<std::size_t>(n) * g.A * P, g.A, P);
        MapRM<S> colm(col.data(), Bff, P);
        colm.noalias() = Km.transpose() * gm;
        col2im_add(col.data(), g, img + static_cast<std::size_t>(n) * g.B * g.H * g.W);
    }
}

// dK += sum_n grid_n * im2col(img_n)^T   (batch order fixed => deterministic)
template <class S>
void kernel_grad_batch(const S* grid, const S* img, int N, const ConvGeom& g, S* dK) {
    const int P = g.P(), Bff = g.Bff();
    std::vector<S> col(static_cast<std::size_t>(Bff) * P);
    MapRM<S> dKm(dK, g.A, Bff);
    for (int n = 0; n < N; ++n) {
        im2col(img + static_cast<std::size_t>(n) * g.B * g.H * g.W, g, col.data());
        CMapRM<S> colm(col.data(), Bff, P);
        CMapRM<S> gm(grid + static_cast<std::size_t>(n) * g.A * P, g.A, P);
        dKm.noalias() += gm * colm.transpose();
    }
}

// db[c] += sum over batch and spatial of t[:, c, :, :]
template <class S>
void bias_grad(const Tensor4<S>& t, S* db) {
    const int N = t.shape.n, C = t.shape.c;
    const std::size_t plane = static_cast<std::size_t>(t.shape.h) * t.shape.w;
    const S* p = t.ptr();
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            S acc = S(0);
            for (std::size_t i = 0; i < plane; ++i) acc += *p++;
            db[c] += acc;
        }
}

}  // namespace dbpn::detail
