#pragma once

#include <stdexcept>
#include <string>

namespace robmix
{
  /** Raised for malformed input: bad dimensions, invalid parameters, unparsable files. */
  class ValidationError : public std::runtime_error
  {
  public:
    explicit ValidationError(const std::string &What) : std::runtime_error(What) {}
  };

  /** Raised when a computation produces non-finite or non-positive-definite values. */
  class NumericError : public std::runtime_error
  {
  public:
    explicit NumericError(const std::string &What) : std::runtime_error(What) {}
  };

  /** File system failures (unreadable input, unwritable output). */
  class IoError : public std::runtime_error
  {
  public:
    explicit IoError(const std::string &What) : std::runtime_error(What) {}
  };
}
