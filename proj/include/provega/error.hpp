#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace provega {

// Root of every error the engine raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- specification documents ------------------------------------------------

class SyntaxError : public Error {
 public:
  using Error::Error;
};

// Carries the dotted property path of the offending value.
class ValidationError : public Error {
 public:
  ValidationError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class MissingProcessorError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class BindingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// ---- data sources -----------------------------------------------------------

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(std::size_t record, const std::string& message)
      : Error("record " + std::to_string(record) + ": " + message), record_(record) {}

  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class ConnectError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// ---- scheduling -------------------------------------------------------------

class InvalidPlanError : public Error {
 public:
  using Error::Error;
};

class IllegalTransitionError : public Error {
 public:
  using Error::Error;
};

// ---- history ----------------------------------------------------------------

class ConflictError : public Error {
 public:
  using Error::Error;
};

class EmptyHistoryError : public Error {
 public:
  using Error::Error;
};

class HistoryEvictedError : public Error {
 public:
  using Error::Error;
};

// ---- processors -------------------------------------------------------------

class ProcessorError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public ProcessorError {
 public:
  using ProcessorError::ProcessorError;
};

class InvalidBinningError : public ProcessorError {
 public:
  using ProcessorError::ProcessorError;
};

// ---- networking -------------------------------------------------------------

class BindError : public Error {
 public:
  using Error::Error;
};

}  // namespace provega
