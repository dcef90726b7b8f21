#pragma once

#include <stdexcept>
#include <string>

namespace budget_bandit {

// Value outside the mathematical domain of an operation (x ∉ [0,1], negative weight, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Operation not defined for the given curve family (e.g. derivative of a step).
struct UnsupportedOperation : std::logic_error {
  using std::logic_error::logic_error;
};

// Instance mixes curve families that no exact oracle handles.
struct UnsupportedInstance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problem exceeds an enumeration budget (grid compositions, step subsets).
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration: dimension mismatches, missing or invalid fields.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Caller broke an interface contract (e.g. feeding full-only feedback to the allocator).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace budget_bandit
