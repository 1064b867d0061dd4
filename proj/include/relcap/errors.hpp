/**
 * @file errors.hpp
 * @brief Exception types raised by the relcap library.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace relcap {

/// Base class of every error thrown by relcap.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A domain description that cannot be discretized (bad spacing, bad box, ...).
class BadSpec : public Error {
public:
    explicit BadSpec(const std::string& what) : Error("invalid domain: " + what) {}
};

/// The discretized domain has no interior node.
class EmptyDomain : public Error {
public:
    explicit EmptyDomain(const std::string& what) : Error("empty domain: " + what) {}
};

/// Node indices that are not closure nodes of the domain.
class OutOfDomain : public Error {
public:
    explicit OutOfDomain(const std::string& what) : Error("out of domain: " + what) {}
};

/// Two objects that must live on the same domain do not.
class DomainMismatch : public Error {
public:
    explicit DomainMismatch(const std::string& what) : Error("domain mismatch: " + what) {}
};

/// Exponent outside the supported range [1.1, 10].
class BadExponent : public Error {
public:
    explicit BadExponent(const std::string& what) : Error("bad exponent: " + what) {}
};

/// A candidate that violates the obstacle constraint by more than numerical slack.
class Infeasible : public Error {
public:
    explicit Infeasible(const std::string& what) : Error("infeasible: " + what) {}
};

/// A capacitary measure with clearly negative weights (solver failure).
class NegativeMeasure : public Error {
public:
    explicit NegativeMeasure(const std::string& what) : Error("negative measure: " + what) {}
};

/// A solve that exhausted its iteration budget where a converged result is required.
class NonConvergence : public Error {
public:
    explicit NonConvergence(const std::string& what) : Error("non-convergence: " + what) {}
};

/// Solver options that do not fit the problem (e.g. the p = 2 active-set method for p != 2).
class InvalidOptions : public Error {
public:
    explicit InvalidOptions(const std::string& what) : Error("invalid solver options: " + what) {}
};

/// Malformed or inconsistent configuration / input file.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

}  // namespace relcap
