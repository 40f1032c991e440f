// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace smp {

/// Input outside the admissible domain of an operation (e.g. rho out of bounds).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A tensor that must be inverted is singular. `tensor()` names it.
class SingularOperatorError : public std::runtime_error {
public:
    explicit SingularOperatorError(std::string tensor)
        : std::runtime_error("singular operator: " + tensor), tensor_(std::move(tensor)) {}
    const std::string& tensor() const noexcept { return tensor_; }

private:
    std::string tensor_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition (step mismatch, k <= i, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class OptimizerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace smp
