#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hmap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateMetricError : public Error {
 public:
  DegenerateMetricError(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ExpressionError : public Error {
 public:
  ExpressionError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

class TopologyError : public Error {
 public:
  TopologyError(const std::string& what, long edge)
      : Error(what), edge_(edge) {}
  long edge() const noexcept { return edge_; }

 private:
  long edge_;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class CompatibilityError : public Error {
 public:
  CompatibilityError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line, std::string key)
      : Error(what), line_(line), key_(std::move(key)) {}
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

}  // namespace hmap
