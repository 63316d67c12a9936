#pragma once

#include <stdexcept>
#include <string>

namespace gpusim {

/// Base class of every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (topology, run config, policy names).
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A trace row that cannot be tokenized or converted.
class ParseError : public Error {
public:
    ParseError(std::size_t row, std::string field, const std::string& reason)
        : Error("row " + std::to_string(row) + ", field '" + field + "': " + reason),
          row_(row), field_(std::move(field)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t row_;
    std::string field_;
};

/// A well-formed trace record that violates a job-record invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ParamError : public Error {
public:
    using Error::Error;
};

class CostModelError : public Error {
public:
    using Error::Error;
};

class UnknownPartition : public Error {
public:
    using Error::Error;
};

class UnknownJob : public Error {
public:
    using Error::Error;
};

/// Raised when a commit touches a GPU that is already held by another job.
/// Always indicates a placement-policy bug.
class SlotConflict : public Error {
public:
    using Error::Error;
};

/// Internal bookkeeping failure (negative remaining service, broken conservation).
class InvariantViolation : public Error {
public:
    using Error::Error;
};

class AccountingError : public InvariantViolation {
public:
    using InvariantViolation::InvariantViolation;
};

}  // namespace gpusim
