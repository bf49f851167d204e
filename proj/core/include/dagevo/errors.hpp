#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dagevo {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimensions that cannot be reconciled.
class ShapeError : public Error {
  public:
    using Error::Error;
};

/// A value outside of its declared domain.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// An operation invoked on an object in the wrong state (e.g. unevaluated individual).
class StateError : public Error {
  public:
    using Error::Error;
};

/// Non-finite values appeared in a forward or backward pass.
class NumericsError : public Error {
  public:
    using Error::Error;
};

/// The MASE denominator vanishes (constant series).
class DegenerateSeriesError : public Error {
  public:
    using Error::Error;
};

class InsufficientDataError : public Error {
  public:
    InsufficientDataError(const std::string& what, std::size_t required, std::size_t available);

    std::size_t required() const noexcept { return required_; }
    std::size_t available() const noexcept { return available_; }

  private:
    std::size_t required_;
    std::size_t available_;
};

/// Malformed text input. `line` is 1-based (0 when unknown); `field` names the offending key or column.
class ParseError : public Error {
  public:
    ParseError(const std::string& message, std::string field = {}, std::size_t line = 0);

    const std::string& field() const noexcept { return field_; }
    std::size_t line() const noexcept { return line_; }

  private:
    std::string field_;
    std::size_t line_;
};

/// A missing cell in an otherwise well-formed CSV file.
class MissingValueError : public Error {
  public:
    MissingValueError(std::size_t row, std::size_t column);

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

  private:
    std::size_t row_;
    std::size_t column_;
};

class ConfigError : public Error {
  public:
    ConfigError(std::string key, const std::string& message);

    const std::string& key() const noexcept { return key_; }

  private:
    std::string key_;
};

/// A model file that does not match the export schema or the network it describes.
class SchemaError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    IoError(std::string path, const std::string& message);

    const std::string& path() const noexcept { return path_; }

  private:
    std::string path_;
};

/// Wraps an exception thrown by a user evaluator with the id of the individual being evaluated.
class EvaluationError : public Error {
  public:
    EvaluationError(std::uint64_t individual_id, const std::string& message);

    std::uint64_t individual_id() const noexcept { return individual_id_; }

  private:
    std::uint64_t individual_id_;
};

}  // namespace dagevo
