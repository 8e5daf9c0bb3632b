#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tensorlite {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Element counts, ranks or extents that do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Two shapes that cannot be broadcast together. `axis()` is the offending
/// axis counted from the right (-1 is the last axis).
class BroadcastError : public ShapeError {
public:
    BroadcastError(const std::string& what, std::int64_t axis)
        : ShapeError(what), axis_(axis) {}

    std::int64_t axis() const noexcept { return axis_; }

private:
    std::int64_t axis_;
};

class AxisError : public Error {
public:
    using Error::Error;
};

/// Out-of-domain arguments (probabilities, labels, hyperparameters).
class ValueError : public Error {
public:
    using Error::Error;
};

class AutogradError : public Error {
public:
    using Error::Error;
};

/// backward() on a non-scalar output without an explicit seed.
class SeedRequiredError : public AutogradError {
public:
    using AutogradError::AutogradError;
};

/// backward() on a tensor that has no node on the live tape.
class NoGraphError : public AutogradError {
public:
    using AutogradError::AutogradError;
};

/// A tensor saved for a pullback was mutated in place after recording.
class InPlaceModifiedError : public AutogradError {
public:
    using AutogradError::AutogradError;
};

/// Two evaluations of the same function at the same point disagreed.
class DeterminismError : public Error {
public:
    using Error::Error;
};

}  // namespace tensorlite
