#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fedsim {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/layer shape disagreement. Keeps both sides for diagnostics.
class ShapeError : public Error {
 public:
  ShapeError(std::string expected, std::string actual, const std::string& context)
      : Error(context + ": expected shape " + expected + ", got " + actual),
        expected_(std::move(expected)),
        actual_(std::move(actual)) {}

  const std::string& expected() const noexcept { return expected_; }
  const std::string& actual() const noexcept { return actual_; }

 private:
  std::string expected_;
  std::string actual_;
};

class CodecError : public Error {
 public:
  enum class Kind { MagnitudeOverflow, MalformedPayload, ShapeMismatch, BadFormat };

  CodecError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Invalid experiment or module configuration; names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("config field '" + field + "': " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Numeric failure during local training; carries the epoch/step it happened at.
class TrainingError : public Error {
 public:
  TrainingError(int epoch, int step, const std::string& message)
      : Error("epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": " + message),
        epoch_(epoch),
        step_(step) {}

  int epoch() const noexcept { return epoch_; }
  int step() const noexcept { return step_; }

 private:
  int epoch_;
  int step_;
};

/// Broken internal invariant (a bug, not a user error).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedsim
