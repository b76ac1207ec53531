#pragma once

#include <stdexcept>
#include <string>

namespace mfglab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Field length does not match the grid, or two fields live on different grids.
class DimensionError : public Error {
public:
    using Error::Error;
};

class GridTooSmallError : public Error {
public:
    using Error::Error;
};

class InvalidExponentError : public Error {
public:
    using Error::Error;
};

class InvalidParameterError : public Error {
public:
    using Error::Error;
};

/// A user-supplied Lagrangian returned a non-finite value inside the control ball.
class LagrangianEvaluationError : public Error {
public:
    using Error::Error;
};

/// A subgradient selection was observed to be non-monotone.
class ConvexityViolationError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ControlOutOfBallError : public Error {
public:
    using Error::Error;
};

class InvalidDensityError : public Error {
public:
    using Error::Error;
};

/// Picard iteration of the Duhamel operator failed to contract.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Configuration text could not be parsed or failed validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace mfglab
