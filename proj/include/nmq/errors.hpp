#ifndef NMQ_ERRORS_HPP
#define NMQ_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmq {

// Base class for all library errors. Subclasses map onto the C API status
// codes and the CLI exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent experiment configuration. Message carries the
// location (dotted key path) of the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A numeric operation failed: non-finite values, degenerate states,
// indefinite correlation inputs.
class NumericError : public Error {
public:
    using Error::Error;
};

// Requested tensor dimension exceeds the configured cap.
class DimensionCapError : public NumericError {
public:
    DimensionCapError(std::size_t requested, std::size_t cap)
        : NumericError("dimension cap exceeded: requested " + std::to_string(requested) +
                       ", cap " + std::to_string(cap)),
          requested_(requested), cap_(cap) {}
    std::size_t requested() const { return requested_; }
    std::size_t cap() const { return cap_; }

private:
    std::size_t requested_;
    std::size_t cap_;
};

// Index (factor, bin, sample) out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

// Correlation function is not positive semidefinite within tolerance.
// Carries the most negative eigenvalue found.
class NotFactorizableError : public NumericError {
public:
    NotFactorizableError(const std::string& msg, double min_eigenvalue)
        : NumericError(msg), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

// A conditioning/retrodiction operation needs more record samples than
// provided. Carries the required horizon.
class InsufficientRecordError : public Error {
public:
    InsufficientRecordError(const std::string& msg, std::size_t required_horizon)
        : Error(msg), required_horizon_(required_horizon) {}
    std::size_t required_horizon() const { return required_horizon_; }

private:
    std::size_t required_horizon_;
};

// Zero-norm or otherwise unusable quantum state.
class InvalidStateError : public NumericError {
public:
    using NumericError::NumericError;
};

// File system failures; message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace nmq

#endif
