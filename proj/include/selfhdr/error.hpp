#pragma once

#include <stdexcept>
#include <string>

namespace selfhdr {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejected argument: wrong shape, out-of-range values, invalid config.
class InputError : public Error {
public:
    using Error::Error;
};

/// File or dataset problem: missing file, bad magic, truncated payload.
class DataError : public Error {
public:
    using Error::Error;
};

/// Training or evaluation produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace selfhdr
