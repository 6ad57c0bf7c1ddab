#pragma once

#include <stdexcept>
#include <string>

namespace w2s {

// Violated precondition or type invariant (dimension mismatch, bad floor, ...).
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input that carries no usable signal (all-zero raw outputs, non-finite values).
struct DegenerateInput : std::domain_error {
    using std::domain_error::domain_error;
};

// Non-finite value produced during training or evaluation.
struct NumericOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace w2s
