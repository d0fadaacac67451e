#pragma once

#include <stdexcept>
#include <string>

namespace autocal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, violated preconditions, bad configuration.
/// The CLI maps this family to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

/// A value outside the domain of an operation (out-of-bounds parameter,
/// nonpositive variance, ...).
class DomainError : public InputError {
public:
    using InputError::InputError;
};

/// Numerical failure: non-convergence, failed line searches, non-finite
/// objectives. The CLI maps this family to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace autocal
