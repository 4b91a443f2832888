#pragma once

#include <stdexcept>
#include <string>

namespace adl {

// Base of every error the library throws. Solver outcomes such as an
// infeasible LP are reported through status values, not exceptions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedLpError : public Error {
public:
    using Error::Error;
};

class IterationLimitError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Structural problem in an input file; the message carries the JSON/CSV path.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a named model invariant.
class InvariantError : public Error {
public:
    using Error::Error;
};

class NetworkError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class BigMError : public Error {
public:
    using Error::Error;
};

}  // namespace adl
