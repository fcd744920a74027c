// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dbpn/ops.hpp"

namespace dbpn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;          // number of probed scalar entries
    std::string worst;                // "tensor#k[i]" of the worst entry
    double analytic = 0.0, numeric = 0.0;  // at the worst entry

    bool ok(double tol) const { return max_rel_err < tol; }
};

// Central finite differences against the tape's analytic gradients.
//
// `forward` must recompute the scalar loss from the current contents of the
// probed tensors (they are perturbed in place).  Use S = double and keep
// inputs away from PReLU kinks; step ~1e-5 puts the truncation and roundoff
// error floor near 1e-10 for O(1) gradients.
template <class S>
GradCheckReport finite_diff_check(const std::function<Tensor4<S>()>& forward,
                                  std::vector<Tensor4<S>*> probes,
                                  double step = 1e-5) {
    for (auto* p : probes) {
        p->requires_grad = true;
        p->ensure_grad();
        p->zero_grad();
    }
    std::vector<std::vector<S>> analytic;
    {
        Tape<S> tape;
        Tensor4<S> loss;
        {
            TapeScope<S> scope(tape);
            loss = forward();
        }
        tape.backward(loss);
        for (auto* p : probes) analytic.push_back(*p->grad);
        tape.clear();
    }
    GradCheckReport rep;
    const S h = static_cast<S>(step);
    for (std::size_t k = 0; k < probes.size(); ++k) {
        auto& buf = *probes[k]->data;
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const S keep = buf[i];
            buf[i] = keep + h;
            const double lp = static_cast<double>(forward().item());
            buf[i] = keep - h;
            const double lm = static_cast<double>(forward().item());
            buf[i] = keep;
            const double num = (lp - lm) / (2.0 * static_cast<double>(h));
            const double ana = static_cast<double>(analytic[k][i]);
            const double denom = std::max({std::abs(ana), std::abs(num), 1.0});
            const double rel = std::abs(ana - num) / denom;
            ++rep.checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = msg_cat("tensor#", k, "[", i, "]");
                rep.analytic = ana;
                rep.numeric = num;
            }
        }
    }
    return rep;
}

}  // namespace dbpn
