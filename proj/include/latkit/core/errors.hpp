#pragma once

#include <stdexcept>
#include <string>

namespace latkit {

// Bad value passed to an operation (negative std, zero batch where forbidden, ...).
struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Tensor/matrix dimensions do not line up.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Producer and consumer disagree on device placement.
struct PlacementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File exists but its layout/version is not what the reader expects.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Optimization failed (divergence, non-finite loss, ...).
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem trouble: unreadable, unwritable, truncated.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration; carries the offending key for diagnostics.
struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(std::string k, const std::string& what)
        : std::runtime_error(what), key(std::move(k)) {}
};

// A required input artifact (checkpoint, report, corpus) is missing.
struct DependencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace latkit
