// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace psdg {

// Runtime failure of a precondition, a numerical contract, or an I/O step.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid user-facing configuration (bad key, bad value, bad range).
// The CLI maps this to exit code 1; every other Error maps to 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

namespace detail {

inline void append_all(std::ostringstream&) {}

template <class T, class... Rest>
void append_all(std::ostringstream& os, const T& head, const Rest&... rest) {
    os << head;
    append_all(os, rest...);
}

template <class... Parts>
std::string concat(const Parts&... parts) {
    std::ostringstream os;
    os.precision(17);
    detail::append_all(os, parts...);
    return os.str();
}

} // namespace detail

template <class... Parts>
[[noreturn]] void fail(const Parts&... parts) {
    throw Error(detail::concat(parts...));
}

template <class... Parts>
[[noreturn]] void fail_config(const Parts&... parts) {
    throw ConfigError(detail::concat(parts...));
}

template <class... Parts>
void require(bool condition, const Parts&... parts) {
    if (!condition) fail(parts...);
}

} // namespace psdg
