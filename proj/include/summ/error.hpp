#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace summ {

// Base class for all library errors. The CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed bracketed-tree input. `offset` is the byte position in the input string.
struct TreeParseError : Error {
    TreeParseError(const std::string& what, std::size_t offset_in)
        : Error(what + " at byte " + std::to_string(offset_in)), offset(offset_in) {}
    std::size_t offset;
};

// Shape mismatches, out-of-range indices, non-scalar loss.
struct ShapeError : Error {
    using Error::Error;
};

// Bad corpus lines, checkpoint contents, vocab files.
struct DataError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Non-finite loss or gradients.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace summ
