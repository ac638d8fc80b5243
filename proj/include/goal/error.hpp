#pragma once

#include <stdexcept>
#include <string>

namespace goal {

// Exit-code category attached to every library error. The CLI maps these
// directly onto process exit codes.
enum class ErrorKind { validation = 2, io = 3, internal = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Bad user input: flags, dataset schema, dangling references.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

/// Malformed file contents. `offset` is the byte position where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(ErrorKind::validation,
              what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// Shape mismatch between tensor operands.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorKind::internal, what) {}
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error(ErrorKind::internal, what) {}
};

/// Operation invoked in the wrong lifecycle state (e.g. a second backward pass).
class StateError : public Error {
 public:
  explicit StateError(const std::string& what)
      : Error(ErrorKind::internal, what) {}
};

inline const char* error_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::io: return "io";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

}  // namespace goal
