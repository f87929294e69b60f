#pragma once

#include <stdexcept>
#include <string>

namespace auditline {

// Base class for all failures raised by the kernel. Protocol rejections are
// not errors and are returned as values (see protocol.hpp).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A log line that is not a canonical event record. Carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

// Sequence numbering of a stored log is broken (gap or duplicate).
class IntegrityError : public Error {
 public:
  IntegrityError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

class SerializationError : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

class RegistryError : public Error {
 public:
  using Error::Error;
};

// An admitted event references something the registry cannot interpret.
class ProjectionError : public Error {
 public:
  using Error::Error;
};

class ContextError : public Error {
 public:
  using Error::Error;
};

class ConsolidationError : public Error {
 public:
  using Error::Error;
};

// Report inputs disagree (e.g. matrix built from a different state).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class DispatchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RunError : public Error {
 public:
  using Error::Error;
};

}  // namespace auditline
