#pragma once

#include <cassert>
#include <stdexcept>
#include <string>

namespace jiif {

/// Bad or inconsistent run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Missing or malformed dataset files (CLI exit code 3).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required (CLI exit code 4).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace jiif

// Contract checks that are only active in debug builds.
#ifndef NDEBUG
#define JIIF_DASSERT(cond, msg) assert((cond) && (msg))
#else
#define JIIF_DASSERT(cond, msg) ((void)0)
#endif
