#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cmdpm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or input document is malformed.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An LP or constrained MDP has no feasible point. The certificate holds
/// the Farkas multipliers of the failing program (see LpSolution::certificate).
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, std::vector<double> certificate = {})
        : Error(what), certificate_(std::move(certificate)) {}

    const std::vector<double>& certificate() const noexcept { return certificate_; }

private:
    std::vector<double> certificate_;
};

/// A wall-clock deadline passed before the computation finished.
class TimeoutError : public Error {
public:
    using Error::Error;
};

/// Floating point trouble (singular basis, duality gap) that the solver could not recover from.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace cmdpm
