#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cospar {

// Invalid grid, kernel or engine settings.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Factorization or optimization failure inside inference.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double last_gradient_norm = 0.0)
        : std::runtime_error(what), last_gradient_norm_(last_gradient_norm) {}

    double last_gradient_norm() const noexcept { return last_gradient_norm_; }

private:
    double last_gradient_norm_;
};

// Feedback that does not fit the engine's current state.
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed objective CSV or snapshot document.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Request payload failed validation; `fields` lists the offending entries.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(const std::string& what, std::vector<std::string> fields = {})
        : std::invalid_argument(what), fields_(std::move(fields)) {}

    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    std::vector<std::string> fields_;
};

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Stale iteration token or duplicate id.
class ConflictError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedVersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cospar
