#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace perfspec {

/// Raised when a metric is evaluated outside its domain (zero time, zero misses, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised for malformed or invariant-violating input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parse failure at a specific 1-based line of the input.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, std::string reason)
        : DataError("line " + std::to_string(line) + ": " + reason),
          line_(line),
          reason_(std::move(reason)) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

class MergeError : public DataError {
public:
    using DataError::DataError;
};

/// Raised by assembly and solver kernels on structurally invalid systems.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonConvergenceError : public SolverError {
public:
    NonConvergenceError(std::size_t iterations, double relative_residual)
        : SolverError("solver did not converge after " + std::to_string(iterations) +
                      " iterations (relative residual " + std::to_string(relative_residual) + ")"),
          iterations_(iterations),
          relative_residual_(relative_residual) {}

    [[nodiscard]] std::size_t iterations() const noexcept { return iterations_; }
    [[nodiscard]] double relative_residual() const noexcept { return relative_residual_; }

private:
    std::size_t iterations_;
    double relative_residual_;
};

} // namespace perfspec
