#pragma once

#include <stdexcept>
#include <string>

namespace malprotect {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two vectors (or a vector and a table) disagree on dimensionality.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Calibration values that would make an indicator divide by zero, or too
/// little data to calibrate from.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed artifact on disk.
class ArtifactError : public Error {
 public:
  using Error::Error;
};

/// The Shapiro-Wilk statistic is undefined for the given sample.
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

/// Memory or similar resource exhaustion during an experiment.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace malprotect
