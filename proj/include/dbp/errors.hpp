#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dbp {

/// Input that violates an operation's preconditions (shape, range, finiteness).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// API misuse that is not a property of the data, e.g. backward before forward.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite values produced during computation (divergent training, bad gradients).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed container or checkpoint. Carries the byte offset of the offending field.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& field, std::uint64_t offset, const std::string& what)
        : std::runtime_error(what + " (field '" + field + "' at byte offset " +
                             std::to_string(offset) + ")"),
          field_(field),
          offset_(offset) {}

    const std::string& field() const noexcept { return field_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::string field_;
    std::uint64_t offset_;
};

}  // namespace dbp
