#pragma once

#include <stdexcept>
#include <string>

namespace sgne {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Non-finite state detected by the iteration loop.
class DivergenceError : public Error {
 public:
  DivergenceError(long iteration, const std::string& detail)
      : Error("diverged at iteration " + std::to_string(iteration) + ": " + detail),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class PreconditionerError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgne
