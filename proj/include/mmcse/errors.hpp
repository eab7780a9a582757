#pragma once

#include <stdexcept>
#include <string>

namespace mmcse {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape or extent disagreement.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite values or other bad numeric state in tensor data.
struct ValueError : Error {
    using Error::Error;
};

// Dataset / checkpoint / config contents that fail their contract.
struct ValidationError : Error {
    using Error::Error;
};

// Numeric failure: NaN loss, gradient check above tolerance.
struct NumericError : Error {
    using Error::Error;
};

// File I/O errors, split by kind so callers can tell them apart.
struct IoError : Error {
    using Error::Error;
};
struct BadMagicError : IoError {
    using IoError::IoError;
};
struct TruncatedFileError : IoError {
    using IoError::IoError;
};
struct ExtentError : IoError {
    using IoError::IoError;
};

}  // namespace mmcse
