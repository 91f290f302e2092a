#pragma once

#include <stdexcept>
#include <string>

namespace qvr {

// Precondition violations (bad alpha, mismatched lengths, ...) are reported
// with std::invalid_argument. The types below cover runtime failures that
// callers are expected to branch on.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or schema-violating configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The model (builtin evaluator or external simulator) failed to produce a value.
class ModelError : public Error {
public:
    using Error::Error;
};

/// A sample is too degenerate for the requested estimator: empty stratum,
/// constant control column, no point in a conditioning event, ...
class DegenerateSample : public Error {
public:
    using Error::Error;
};

/// Rejection sampling gave up before every stratum quota was met.
class QuotaError : public Error {
public:
    using Error::Error;
};

/// An adaptive procedure did not settle on a usable answer (for instance the
/// importance density fit on a multimodal event).
class NonConvergence : public Error {
public:
    using Error::Error;
};

}  // namespace qvr
