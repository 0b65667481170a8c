#pragma once

#include <stdexcept>
#include <string>

namespace lfr {

// Base class for everything the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

// Malformed file content (manifest, weights, scene config).
class FormatError : public Error {
public:
    using Error::Error;
};

// Arguments violate an operation's preconditions (shape, range, config).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

} // namespace lfr
