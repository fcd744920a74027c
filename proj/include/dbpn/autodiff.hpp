// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "dbpn/tensor.hpp"

namespace dbpn {

// Define-by-run reverse-mode tape.  Ops record themselves on the active tape
// (if any); backward() replays the closures in reverse.
//
// Gradient semantics: leaf parameters (requires_grad) accumulate into .grad
// until explicitly zeroed; every intermediate produced on the tape gets its
// scratch gradient re-zeroed at the start of each backward() call.  Two
// backward() calls without a reset therefore yield exactly doubled parameter
// gradients, not a compounding mess.
template <class S>
class Tape {
public:
    struct Node {
        Tensor4<S> out;
        std::function<void()> back;
    };

    static Tape*& active() {
        thread_local Tape* t = nullptr;
        return t;
    }

    void record(Tensor4<S> out, std::function<void()> back) {
        nodes_.push_back(Node{std::move(out), std::move(back)});
    }

    void backward(Tensor4<S>& loss) {
        DBPN_CHECK(loss.numel() == 1,
                   "backward() needs a scalar loss, got ", to_string(loss.shape));
        DBPN_CHECK(loss.on_tape, "backward(): loss was not produced on this tape");
        for (auto& n : nodes_) {
            if (!n.out.requires_grad) n.out.zero_grad();
        }
        loss.ensure_grad();
        (*loss.grad)[0] = S(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->back();
    }

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

// RAII activation of a tape for the current thread.  Per-pass usage:
//   Tape<float> tape; { TapeScope<float> scope(tape); ... forward ... }
//   tape.backward(loss); tape.clear();
template <class S>
class TapeScope {
public:
    explicit TapeScope(Tape<S>& t) : prev_(Tape<S>::active()) {
        Tape<S>::active() = &t;
    }
    ~TapeScope() { Tape<S>::active() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape<S>* prev_;
};

// Returns the active tape when `any_input_participates`, else nullptr.
//
// Recording pattern for ops (order matters):
//   1. allocate .grad on the output and every participating input
//      (so every handle copied into the closure shares the same buffer),
//   2. mark the output on_tape,
//   3. record the closure; it must accumulate (+=) into input gradients.
template <class S>
Tape<S>* tape_for(bool any_input_participates) {
    Tape<S>* t = Tape<S>::active();
    return (t && any_input_participates) ? t : nullptr;
}

}  // namespace dbpn
