#pragma once

#include <stdexcept>
#include <string>

namespace mponet {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes (element counts, contraction extents, ...).
struct ShapeError : Error {
    using Error::Error;
};

// Invalid axis list (not a permutation, out of range, duplicates).
struct AxisError : Error {
    using Error::Error;
};

// Iterative algorithm failed to converge.
struct NumericalError : Error {
    using Error::Error;
};

// Inconsistent MPO structure specification.
struct StructureError : Error {
    using Error::Error;
};

// Requested operation would exceed the configured memory guard.
struct CapacityError : Error {
    using Error::Error;
};

// Malformed input file (IDX stream, model archive).
struct FormatError : Error {
    using Error::Error;
};

// Caller violated an API contract (bad arguments, empty input).
struct UsageError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

} // namespace mponet
