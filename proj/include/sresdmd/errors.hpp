#pragma once

#include <stdexcept>
#include <string>

namespace sresdmd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside an operation's domain (M = 0, negative length, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// Gram matrix has no singular value above the cutoff.
class RankError : public Error {
 public:
  using Error::Error;
};

// Requested quantity needs data the caller did not provide (e.g. H without
// batched snapshots).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class EmptyResultError : public Error {
 public:
  using Error::Error;
};

class InstabilityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sresdmd
