#pragma once

#include <stdexcept>
#include <string>

namespace ssmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, unknown labels, bad token ids, empty corpora.
class DataError : public Error {
public:
  using Error::Error;
};

/// Non-finite values or violated numeric preconditions (lambda out of range, ...).
class NumericError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration or arguments.
class UsageError : public Error {
public:
  using Error::Error;
};

} // namespace ssmix
