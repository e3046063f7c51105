#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oasfim {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed YAML or JSON input. Line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::string message, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
              message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A local "$ref" whose JSON pointer target does not exist.
class DanglingRef : public Error {
 public:
  DanglingRef(std::string ref, std::string at)
      : Error("dangling reference '" + ref + "' at " + at), ref_(std::move(ref)), at_(std::move(at)) {}

  const std::string& ref() const noexcept { return ref_; }
  const std::string& at() const noexcept { return at_; }

 private:
  std::string ref_;
  std::string at_;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class UnknownToken : public Error {
 public:
  using Error::Error;
};

class BudgetTooSmall : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class EmptyResults : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  BackendError(int status, std::string body)
      : Error("backend returned status " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

class BackendTimeout : public Error {
 public:
  using Error::Error;
};

}  // namespace oasfim
