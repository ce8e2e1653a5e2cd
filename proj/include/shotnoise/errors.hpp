#pragma once

#include <stdexcept>
#include <string>

namespace shotnoise {

// Input outside the mathematical domain of an operation (exit code 3).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A numerical procedure failed to reach its tolerance (exit code 4).
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Scenario/law description does not match the schema (exit code 2).
class SchemaError : public std::runtime_error {
public:
    SchemaError(const std::string& pointer, const std::string& what)
        : std::runtime_error(pointer + ": " + what), pointer_(pointer) {}
    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

// Not enough derivative data supplied to a combinatorial formula.
class ArityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace shotnoise
