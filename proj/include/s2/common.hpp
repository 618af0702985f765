#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace s2 {

// Error taxonomy. ConfigError maps to CLI exit code 2, NumericalError to 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

using index_t = std::int64_t;

} // namespace s2
