#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icnn {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or size disagreement between tensors and layer parameters.
struct DimensionError : Error {
    using Error::Error;
};

// A value outside its documented domain (labels, fractions, probabilities, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// An increment plan inconsistent with the architecture it is applied to.
struct PlanError : Error {
    using Error::Error;
};

// Sub-network index outside [1, trained_up_to].
struct IncrementError : Error {
    using Error::Error;
};

// Malformed or truncated file; carries the byte offset where parsing stopped.
struct FormatError : Error {
    FormatError(const std::string& msg, std::size_t offset)
        : Error(msg + " (byte offset " + std::to_string(offset) + ")"), byte_offset(offset) {}
    std::size_t byte_offset;
};

struct VersionError : Error {
    using Error::Error;
};

// Training loss became non-finite or blew up; carries the epoch index.
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, int at_epoch)
        : Error(msg + " (epoch " + std::to_string(at_epoch) + ")"), epoch(at_epoch) {}
    int epoch;
};

}  // namespace icnn
