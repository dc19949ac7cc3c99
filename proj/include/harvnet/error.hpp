#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace harvnet {

/// Base class for every error raised by the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration (keyword lists, bin widths, scenario
/// parameters, K, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition on data handed to an operation.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

struct MalformedLine {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

/// Too many malformed records in an event log.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::vector<MalformedLine> offenders)
      : Error(what), offenders_(std::move(offenders)) {}

  const std::vector<MalformedLine>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<MalformedLine> offenders_;
};

/// No events fall inside the requested month.
class EmptyWindowError : public Error {
 public:
  using Error::Error;
};

/// Missing or zero address count for a month in the volume report.
class ReportError : public Error {
 public:
  using Error::Error;
};

/// The iterative eigensolver did not reach the residual tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}

  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

/// Discretization kept producing empty clusters.
class DegeneratePartitionError : public Error {
 public:
  using Error::Error;
};

}  // namespace harvnet
