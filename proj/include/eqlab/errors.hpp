#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eqlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters, broken shape chains, bad link settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unparseable or unsupported file contents (including unknown major versions).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A required input file is missing or unreadable.
class InputError : public Error {
 public:
  using Error::Error;
};

// No configuration of a family fits the complexity budget.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace eqlab
