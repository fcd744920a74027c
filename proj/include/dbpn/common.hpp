// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace dbpn {

// Assemble a message from stream-able parts; used by the error types and the
// check macro below.
template <class... Parts>
std::string msg_cat(const Parts&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    return os.str();
}

// Shape/contract violations. Everything user-facing catches std::exception,
// so these only need to carry a readable message.
struct DimError : std::invalid_argument {
    explicit DimError(const std::string& msg) : std::invalid_argument(msg) {}
    template <class A, class B, class... Rest>
    DimError(const A& a, const B& b, const Rest&... rest)
        : std::invalid_argument(msg_cat(a, b, rest...)) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
    template <class A, class B, class... Rest>
    IoError(const A& a, const B& b, const Rest&... rest)
        : std::runtime_error(msg_cat(a, b, rest...)) {}
};

namespace detail {
inline void fail_dim(const std::string& msg) { throw DimError(msg); }
}  // namespace detail

#define DBPN_CHECK(cond, ...)                                 \
    do {                                                      \
        if (!(cond)) ::dbpn::detail::fail_dim(::dbpn::msg_cat(__VA_ARGS__)); \
    } while (0)

}  // namespace dbpn
