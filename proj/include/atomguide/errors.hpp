#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace atomguide {

enum class ErrorKind { Contract, NumericFault, Setup, Geometry, Convergence, Config };

/// Base of every error raised by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::Contract, what) {}
};

/// NaN or Inf appeared in a field.
class NumericFault : public Error {
 public:
  explicit NumericFault(const std::string& what, long step = -1)
      : Error(ErrorKind::NumericFault, what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Grid or run setup cannot satisfy a solver precondition.
class SetupError : public Error {
 public:
  explicit SetupError(const std::string& what, std::size_t required_points = 0)
      : Error(ErrorKind::Setup, what), required_points_(required_points) {}
  std::size_t required_points() const noexcept { return required_points_; }

 private:
  std::size_t required_points_;
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what) : Error(ErrorKind::Geometry, what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> energy_trace)
      : Error(ErrorKind::Convergence, what), trace_(std::move(energy_trace)) {}
  const std::vector<double>& energy_trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Invalid configuration; `key_path` names the offending entry, e.g. "guide.gamma_deg".
class ConfigError : public Error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : Error(ErrorKind::Config, key_path.empty() ? what : key_path + ": " + what),
        key_path_(std::move(key_path)) {}
  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

}  // namespace atomguide
