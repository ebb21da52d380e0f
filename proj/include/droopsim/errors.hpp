#pragma once

#include <stdexcept>
#include <string>

namespace droopsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric argument is outside its domain (zero impedance, non-positive voltage, ...).
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// The network admittance sum is singular.
class DegenerateNetwork : public Error {
public:
    using Error::Error;
};

/// A configuration violates a runtime guard (e.g. dt >= tau).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Scenario or data file could not be parsed. Message carries file:line.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Requested operating point is outside what the network can deliver.
class InfeasibleTarget : public Error {
public:
    using Error::Error;
};

/// Time stepping stopped early (degenerate network or non-finite state).
class SimulationAbort : public Error {
public:
    SimulationAbort(const std::string& what, double t) : Error(what), t_(t) {}
    double time() const noexcept { return t_; }

private:
    double t_;
};

}  // namespace droopsim
