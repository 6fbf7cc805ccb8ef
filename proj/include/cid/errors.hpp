#pragma once

#include <stdexcept>
#include <string>

namespace cid {

// Bad caller input: unknown names, overlapping sets, malformed files.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Broken internal structure (cycles, violated algorithm contracts).
class StructuralError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Division by a zero-probability quantity during evaluation.
class PositivityError : public std::domain_error {
public:
    PositivityError(const std::string& what, std::string assignment)
        : std::domain_error(what + " at " + assignment), assignment_(std::move(assignment)) {}

    const std::string& assignment() const { return assignment_; }

private:
    std::string assignment_;
};

// Enumeration would exceed the configured state budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cid
