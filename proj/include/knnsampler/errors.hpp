#pragma once

#include <stdexcept>
#include <string>

namespace knnsampler {

// Base class for every failure the library raises; catch this to handle
// the whole family, or one of the derived kinds for a specific condition.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A required column is absent or the file layout is unusable.
class SchemaError : public Error {
public:
    using Error::Error;
};

// A cell failed to parse; the message carries the 1-based data row index.
class ParseError : public Error {
public:
    using Error::Error;
};

// An operation that needs observed pairs was given none.
class EmptyObservedError : public Error {
public:
    using Error::Error;
};

// An index or count is outside its valid range (e.g. k > n).
class BoundsError : public Error {
public:
    using Error::Error;
};

// The least-squares design matrix is rank deficient.
class SingularFitError : public Error {
public:
    using Error::Error;
};

// The requested interval level is unattainable at the given k.
class InfeasibleLevelError : public Error {
public:
    using Error::Error;
};

// Pooling requires at least two replicates.
class InsufficientReplicatesError : public Error {
public:
    using Error::Error;
};

// A statistic requires more sample points than were provided.
class InsufficientSampleError : public Error {
public:
    using Error::Error;
};

// Two inputs that must agree (lengths, dimensions, counts) do not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

// The masking request cannot be satisfied by the eligible units.
class InfeasibleMaskError : public Error {
public:
    using Error::Error;
};

// A configuration value is invalid or unresolved.
class ConfigError : public Error {
public:
    using Error::Error;
};

// The reference-sample construction exhausted its generation budget.
class ReferenceInfeasibleError : public Error {
public:
    using Error::Error;
};

// File could not be opened or written.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace knnsampler
