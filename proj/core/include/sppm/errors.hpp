#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sppm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition on a caller-supplied argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class PartitionError : public Error {
 public:
  PartitionError(int cluster, const std::string& what)
      : Error("cluster " + std::to_string(cluster) + ": " + what),
        cluster_(cluster) {}
  int cluster() const noexcept { return cluster_; }

 private:
  int cluster_;
};

/// A sampling support is larger than the enumeration cap. Callers fall back
/// to closed forms or Monte-Carlo estimates.
class CapExceeded : public Error {
 public:
  CapExceeded(double support_size, double cap)
      : Error("support of size " + std::to_string(support_size) +
              " exceeds enumeration cap " + std::to_string(cap)),
        support_size_(support_size) {}
  double support_size() const noexcept { return support_size_; }

 private:
  double support_size_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

/// Line search could not find an Armijo step. Algorithms rethrow with the
/// global round index filled in.
class SolverStall : public NumericError {
 public:
  explicit SolverStall(const std::string& what, long round = -1)
      : NumericError(round >= 0 ? "round " + std::to_string(round) + ": " + what
                                : what),
        round_(round) {}
  long round() const noexcept { return round_; }

 private:
  long round_;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(long round, double sq_dist)
      : NumericError("diverged at round " + std::to_string(round) +
                     " (squared distance " + std::to_string(sq_dist) + ")"),
        round_(round) {}
  long round() const noexcept { return round_; }

 private:
  long round_;
};

/// Invalid experiment configuration; `field` names the offending JSON path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace sppm
