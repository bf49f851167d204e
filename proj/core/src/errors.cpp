#include "dagevo/errors.hpp"

#include <utility>

namespace dagevo {

InsufficientDataError::InsufficientDataError(const std::string& what, std::size_t required,
                                             std::size_t available)
    : Error(what + ": required " + std::to_string(required) + ", available " +
            std::to_string(available)),
      required_(required),
      available_(available) {}

namespace {

std::string parse_message(const std::string& message, const std::string& field, std::size_t line) {
    std::string out = "parse error";
    if (line > 0) {
        out += " at line " + std::to_string(line);
    }
    if (!field.empty()) {
        out += " (" + field + ")";
    }
    return out + ": " + message;
}

}  // namespace

ParseError::ParseError(const std::string& message, std::string field, std::size_t line)
    : Error(parse_message(message, field, line)), field_(std::move(field)), line_(line) {}

MissingValueError::MissingValueError(std::size_t row, std::size_t column)
    : Error("missing value at row " + std::to_string(row) + ", column " + std::to_string(column)),
      row_(row),
      column_(column) {}

ConfigError::ConfigError(std::string key, const std::string& message)
    : Error("config key '" + key + "': " + message), key_(std::move(key)) {}

IoError::IoError(std::string path, const std::string& message)
    : Error(path + ": " + message), path_(std::move(path)) {}

EvaluationError::EvaluationError(std::uint64_t individual_id, const std::string& message)
    : Error("evaluation of individual " + std::to_string(individual_id) + " failed: " + message),
      individual_id_(individual_id) {}

}  // namespace dagevo
