#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wavestate {

// Root of every error the library throws. Callers that only need to report
// a failure can catch this; the CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  ShapeError(std::ptrdiff_t layer, const std::string& what)
      : Error(layer < 0 ? "shape mismatch at input: " + what
                        : "shape mismatch at layer " + std::to_string(layer) + ": " + what),
        layer_(layer) {}
  // -1 when the network input itself is wrong.
  std::ptrdiff_t layer() const noexcept { return layer_; }

 private:
  std::ptrdiff_t layer_;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class MissingCacheError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Zero-variance or zero-energy input where a normalisation is required.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "config line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace wavestate
