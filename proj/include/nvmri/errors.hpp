#pragma once

#include <stdexcept>
#include <string>

namespace nvmri {

// Bad input or precondition violation. Maps to CLI exit code 2.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Solver or fit failure. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nvmri
