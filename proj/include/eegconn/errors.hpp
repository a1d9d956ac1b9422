#pragma once

#include <stdexcept>
#include <string>

namespace eegconn {

// Each error family maps to one CLI exit code (config 2, data 3, numerical 4).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed recording files; carries the offending row (1-based, 0 = n/a) and field.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row, std::string field)
      : DataError(what), row_(row), field_(std::move(field)) {}
  std::size_t row() const { return row_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t row_;
  std::string field_;
};

}  // namespace eegconn
