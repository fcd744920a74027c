// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "dbpn/common.hpp"

namespace dbpn {

struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Shape4&) const = default;
};

inline std::string to_string(const Shape4& s) {
    return msg_cat("(", s.n, ",", s.c, ",", s.h, ",", s.w, ")");
}

// 4-D dense tensor (batch, channel, height, width), row-major.  A Tensor4 is
// a cheap handle: copies share the underlying buffers, so it can be captured
// by backward closures without duplicating data.
//
//   requires_grad  -- set on leaf parameters; their .grad accumulates across
//                     backward() calls until zero_grad().
//   on_tape        -- set on tensors produced by a recorded op; their .grad
//                     is scratch that backward() re-zeroes on every call.
template <class S>
struct Tensor4 {
    Shape4 shape;
    std::shared_ptr<std::vector<S>> data;
    std::shared_ptr<std::vector<S>> grad;  // allocated lazily
    bool requires_grad = false;
    bool on_tape = false;

    Tensor4() = default;
    explicit Tensor4(Shape4 sh, S fill = S(0))
        : shape(sh), data(std::make_shared<std::vector<S>>(sh.numel(), fill)) {}
    Tensor4(int n, int c, int h, int w, S fill = S(0))
        : Tensor4(Shape4{n, c, h, w}, fill) {}

    bool defined() const { return static_cast<bool>(data); }
    std::size_t numel() const { return shape.numel(); }

    S* ptr() { return data->data(); }
    const S* ptr() const { return data->data(); }

    S& at(int n_, int c_, int h_, int w_) {
        return (*data)[((static_cast<std::size_t>(n_) * shape.c + c_) * shape.h + h_) * shape.w + w_];
    }
    const S& at(int n_, int c_, int h_, int w_) const {
        return (*data)[((static_cast<std::size_t>(n_) * shape.c + c_) * shape.h + h_) * shape.w + w_];
    }

    bool participates() const { return requires_grad || on_tape; }

    void ensure_grad() {
        if (!grad) grad = std::make_shared<std::vector<S>>(numel(), S(0));
    }
    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), S(0));
    }
    S* grad_ptr() {
        ensure_grad();
        return grad->data();
    }

    // Deep copy of values only (fresh storage, no grad, leaf).
    Tensor4<S> clone_data() const {
        Tensor4<S> out(shape);
        if (defined()) *out.data = *data;
        return out;
    }

    void fill(S v) { std::fill(data->begin(), data->end(), v); }

    S item() const {
        DBPN_CHECK(numel() == 1, "item() on non-scalar tensor ", to_string(shape));
        return (*data)[0];
    }
};

// Leaf parameter: gradient storage is allocated up front so that every copy
// of the handle (closures, optimizer, checkpointing) shares one buffer.
template <class S>
Tensor4<S> make_param(Shape4 sh) {
    Tensor4<S> t(sh);
    t.requires_grad = true;
    t.ensure_grad();
    return t;
}

}  // namespace dbpn
