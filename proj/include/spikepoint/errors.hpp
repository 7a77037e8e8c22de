#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spikepoint {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration value (window/overlap, dims, K > N, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input bytes; carries the offset of the offending byte.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, size_t byte_offset)
        : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}
    size_t byte_offset() const { return byte_offset_; }

private:
    size_t byte_offset_;
};

// Input is structurally valid but degenerate (empty clip, sd == 0, ...).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Value outside the coder's representable range.
class EncodingError : public Error {
public:
    using Error::Error;
};

// Argument outside a function's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Non-finite state encountered during simulation or training.
class NumericError : public Error {
public:
    using Error::Error;
};

// Tensor shape disagreement.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Checkpoint container problems (magic, version, manifest).
class CheckpointError : public Error {
public:
    using Error::Error;
};

// API misuse (backward without a tape, bad CLI invocation).
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace spikepoint
