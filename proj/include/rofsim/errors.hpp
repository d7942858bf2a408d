#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rofsim {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or buffer violates a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A spec object failed its invariant checks; `field` names the offending member.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// An element inside a topology failed; carries the element label.
class ElementError : public Error {
public:
    ElementError(std::string label, const std::string& message)
        : Error("element '" + label + "': " + message), label_(std::move(label)) {}

    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

/// Non-fatal conditions (gain compression, over-modulation) collected by elements.
struct Warnings {
    std::vector<std::string> messages;

    void add(std::string message) { messages.push_back(std::move(message)); }
    bool empty() const noexcept { return messages.empty(); }
};

}  // namespace rofsim
