#pragma once

#include <stdexcept>
#include <string>

namespace tcomplete {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes (usage=1, io=2, precondition/ordering=3).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched or impossible sizes (m > N, unequal EMD inputs, ...).
struct SizeError : Error {
    using Error::Error;
};

// An operation received an empty cloud or empty buffer it cannot handle.
struct EmptyInputError : Error {
    using Error::Error;
};

// Numerically degenerate input (zero/parallel 6D vectors, zero-length edge).
struct DegeneracyError : Error {
    explicit DegeneracyError(const std::string& msg, int offending = -1)
        : Error(msg), offending_index(offending) {}
    int offending_index;
};

// Out-of-order frame indices or stage ordering violations.
struct OrderingError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Violated operation precondition that is not a size/empty/ordering issue.
struct PreconditionError : Error {
    using Error::Error;
};

}  // namespace tcomplete
