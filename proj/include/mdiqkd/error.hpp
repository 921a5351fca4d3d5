#pragma once

#include <stdexcept>
#include <string>

namespace mdiqkd {

// Every failure raised by the library derives from Error so the CLI can map
// it onto an exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Root finding, SVD or similar did not converge.
class NumericError : public Error {
public:
    using Error::Error;
};

// A frequency grid does not cover the support it is asked to carry.
class GridError : public Error {
public:
    using Error::Error;
};

// Photon-number distribution truncated with more tail mass than allowed.
class TruncationError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class UnboundedError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace mdiqkd
