#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qfg {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched or unsupported matrix/vector dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A state left (or never was in) the projective chart: chart divisor is
/// zero, or |w| crossed the chart guard during integration.
class ChartError : public Error {
public:
    ChartError(const std::string& msg, double t = -1.0) : Error(msg), time(t) {}
    double time;  // time of chart exit when raised by an integrator, else -1
};

/// Input does not match the requirements of the chosen detection scheme
/// (e.g. non-diagonal Hamiltonian passed to the torus angle stepper).
class SchemeError : public Error {
public:
    using Error::Error;
};

/// Requested reduction/solve is outside the supported manifold set.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Fixed-point iteration failed to reach tolerance within max_iter.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, std::vector<double> history)
        : Error(msg), residuals(std::move(history)) {}
    std::vector<double> residuals;
};

/// Explicit time step violates the stability bound.
class CflError : public Error {
public:
    using Error::Error;
};

/// Config file parse or validation failure; `line` is 1-based, 0 if n/a.
class ConfigError : public Error {
public:
    ConfigError(const std::string& msg, int line_no = 0) : Error(msg), line(line_no) {}
    int line;
};

}  // namespace qfg
