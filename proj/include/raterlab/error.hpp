#pragma once

#include <stdexcept>
#include <string>

namespace raterlab {

/// Domain failure: bad input data, violated preconditions, broken files.
/// The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class GeometryMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace raterlab
