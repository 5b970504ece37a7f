#pragma once

#include <stdexcept>
#include <string>

namespace vehicount {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, unreadable, or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Files that exist but do not parse (bad magic, truncated payload, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Violated preconditions on in-memory arguments.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bad configuration keys or values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vehicount
