// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "dbpn/tensor.hpp"

namespace dbpn {

// Adam with bias correction.  Moment buffers are laid out parallel to the
// parameter list handed to adam_step; the caller keeps that list stable
// across steps (the network owns it).
template <class S>
struct AdamState {
    std::vector<std::vector<S>> m, v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void reset(const std::vector<Tensor4<S>>& params) {
        m.assign(params.size(), {});
        v.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i].assign(params[i].numel(), S(0));
            v[i].assign(params[i].numel(), S(0));
        }
        t = 0;
    }
};

// One optimizer step over `params` using their .grad buffers.
template <class S>
void adam_step(std::vector<Tensor4<S>>& params, AdamState<S>& st, double lr) {
    DBPN_CHECK(st.m.size() == params.size() && st.v.size() == params.size(),
               "adam_step: state tracks ", st.m.size(), " tensors, got ", params.size());
    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    const S b1 = static_cast<S>(st.beta1), b2 = static_cast<S>(st.beta2);
    const S ib1 = static_cast<S>(1.0 - st.beta1), ib2 = static_cast<S>(1.0 - st.beta2);
    // alpha_t folds the bias correction of m into the step size; v's
    // correction stays explicit to match the canonical update exactly.
    const S step = static_cast<S>(lr / bc1);
    const S vcorr = static_cast<S>(1.0 / bc2);
    const S eps = static_cast<S>(st.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        DBPN_CHECK(st.m[i].size() == p.numel(), "adam_step: tensor ", i, " changed size");
        DBPN_CHECK(static_cast<bool>(p.grad), "adam_step: tensor ", i, " has no gradient");
        S* w = p.ptr();
        const S* g = p.grad->data();
        S* mi = st.m[i].data();
        S* vi = st.v[i].data();
        const std::size_t n = p.numel();
        for (std::size_t k = 0; k < n; ++k) {
            mi[k] = b1 * mi[k] + ib1 * g[k];
            vi[k] = b2 * vi[k] + ib2 * g[k] * g[k];
            w[k] -= step * mi[k] / (std::sqrt(vi[k] * vcorr) + eps);
        }
    }
}

template <class S>
void zero_grads(std::vector<Tensor4<S>>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace dbpn
