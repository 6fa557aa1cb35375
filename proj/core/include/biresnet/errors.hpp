#pragma once

#include <stdexcept>
#include <string>

namespace biresnet {

// Error taxonomy mirrored by the CLI exit codes: usage -> 1, data -> 2,
// numerical -> 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Shape mismatches carry the name of the offending axis.
class ShapeError : public DataError {
 public:
  ShapeError(const std::string& axis, const std::string& msg)
      : DataError("shape mismatch on axis '" + axis + "': " + msg), axis_(axis) {}
  const std::string& axis() const { return axis_; }

 private:
  std::string axis_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

}  // namespace biresnet
