#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace loopnorm {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Line/column range inside a source text. Lines and columns are 1-based.
struct SourceSpan {
  std::string file;
  std::size_t start_line = 0;
  std::size_t start_col = 0;
  std::size_t end_line = 0;
  std::size_t end_col = 0;

  std::string to_string() const;
};

/// Syntax or semantic error found while parsing DSL text.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, SourceSpan span);
  const SourceSpan& span() const { return span_; }
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  SourceSpan span_;
};

/// Malformed interchange document. `offset` is a byte offset into the input.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// The program violates an IR invariant required by an operation.
class InvalidProgram : public Error {
 public:
  using Error::Error;
};

/// Enumeration exceeded its iteration cap.
class IterationCapExceeded : public Error {
 public:
  using Error::Error;
};

/// Runtime failure of the reference interpreter (division in integer mode,
/// out-of-bounds access, unbound parameter).
class InterpError : public Error {
 public:
  using Error::Error;
};

/// A recipe step cannot be applied. `step` is its zero-based index.
class IllegalStep : public Error {
 public:
  IllegalStep(std::size_t step, std::string reason)
      : Error("step " + std::to_string(step) + ": " + reason), step_(step), reason_(std::move(reason)) {}
  std::size_t step() const { return step_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t step_;
  std::string reason_;
};

/// A recipe was applied to a nest whose key differs from the recipe's.
class KeyMismatch : public Error {
 public:
  using Error::Error;
};

/// Seeding would bind one key to two different recipes.
class DuplicateKey : public Error {
 public:
  using Error::Error;
};

}  // namespace loopnorm
