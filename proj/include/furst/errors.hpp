#pragma once

#include <stdexcept>
#include <string>

namespace furst {

// Error hierarchy. The CLI maps these onto exit codes (see tools/furstlab.cpp).

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

class NumericUnderflowError : public Error {
public:
    using Error::Error;
};

class DegenerateFrameError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class UnsupportedOperationError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

/// An identity that must hold by construction was violated: an engine bug, not user error.
class InternalConsistencyError : public Error {
public:
    using Error::Error;
};

/// Configuration or input validation failure (exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Requested work exceeds the configured budget (exit code 3).
class BudgetError : public Error {
public:
    using Error::Error;
};

}  // namespace furst
