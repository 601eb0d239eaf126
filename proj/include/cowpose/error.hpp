#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace cowpose {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (wrong joint region, empty input, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A file or document did not follow its format. Carries the byte offset when known.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what, std::optional<std::uint64_t> offset = std::nullopt)
        : Error(offset ? what + " (at byte offset " + std::to_string(*offset) + ")" : what),
          offset_(offset) {}

    std::optional<std::uint64_t> offset() const { return offset_; }

private:
    std::optional<std::uint64_t> offset_;
};

// File system failures: missing inputs, unwritable outputs.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cowpose
