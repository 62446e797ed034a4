#pragma once

#include <stdexcept>
#include <string>

namespace tou {

/// Argument outside the domain of a loss function or demand curve.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Scenario that fails parameter or assumption checks at ingestion.
class InvalidScenario : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to bracket or converge.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A profit target no price vector can reach.
class InfeasibleConstraint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Random scenario generation ran out of resampling attempts.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tou
