#pragma once

#include <stdexcept>
#include <string>

namespace zoneforge {

/// Base class for every domain error thrown by the library. The CLI maps
/// these to exit code 1; anything else is a bug.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent on-disk data (bad header, payload length, byte values).
class FormatError : public Error {
public:
    using Error::Error;
};

/// A domain invariant was violated (mask zone consistency, value ranges).
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Input combination not in the canonical 14-entry list.
class ComboError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (geometry out of grid, bad JSON schema, unknown keys).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor/volume dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Dataset assembly problems (missing map for a combo, missing case).
class DataError : public Error {
public:
    using Error::Error;
};

/// Degenerate statistics input (empty sample, zero variance everywhere).
class StatsError : public Error {
public:
    using Error::Error;
};

/// Distance metrics demanded a non-empty mask.
class EmptyMaskError : public Error {
public:
    using Error::Error;
};

/// Training diverged (NaN loss); carries the offending step index in the message.
class TrainError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure unrelated to content (cannot open/create/write).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace zoneforge
