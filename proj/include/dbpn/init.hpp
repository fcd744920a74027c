// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "dbpn/ops.hpp"
#include "dbpn/rng.hpp"

namespace dbpn {

inline double he_std(int f, int n_filters) {
    return std::sqrt(2.0 / (static_cast<double>(f) * f * n_filters));
}

// He-style init: kernel ~ N(0, 2/(f^2 * n)) with n = filter count (kernel
// dim 0; all transposed layers here are channel-square so the convention is
// unambiguous).  Biases zero.  Deterministic given the Rng state.
template <class S>
void he_init(ConvParams<S>& p, Rng& rng) {
    const double stddev = he_std(p.f(), p.kernel.shape.n);
    for (auto& v : *p.kernel.data) v = static_cast<S>(rng.normal() * stddev);
    p.bias.fill(S(0));
}

}  // namespace dbpn
