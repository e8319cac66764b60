#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace autostat {

// Malformed kernel text or malformed CSV. `where` is a byte offset for kernel
// text and a 1-based row number for CSV files.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg, std::size_t where = 0)
      : std::runtime_error(msg), where_(where) {}
  std::size_t where() const { return where_; }

 private:
  std::size_t where_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace autostat
