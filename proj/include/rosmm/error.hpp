#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rosmm {

/// Broad failure classes. Each maps onto one CLI exit code.
enum class ErrorCategory {
  Config,   // invalid parameters or usage (exit 1)
  Data,     // malformed files, missing inputs, degenerate datasets (exit 2)
  Numeric,  // NaN, poles, saturation, divergence (exit 3)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& what) : DataError(what) {}
};

/// A class or bin whose weights sum to zero, or a point where a ratio is undefined.
class DegenerateError : public DataError {
 public:
  explicit DegenerateError(const std::string& what) : DataError(what) {}
};

/// A required sign-partition subset is empty.
class InsufficientSupportError : public DataError {
 public:
  explicit InsufficientSupportError(const std::string& what) : DataError(what) {}
};

/// Inverse-transform sampling requested for a signed (non-monotone CDF) mixture.
class NonInvertibleCdfError : public DataError {
 public:
  explicit NonInvertibleCdfError(const std::string& what) : DataError(what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

/// Non-finite values encountered during computation. Carries an optional
/// location (sample index, epoch, batch) for diagnostics; -1 means unset.
class NumericFailure : public NumericError {
 public:
  explicit NumericFailure(const std::string& what, long sample = -1, long epoch = -1,
                          long batch = -1)
      : NumericError(what), sample_(sample), epoch_(epoch), batch_(batch) {}

  long sample() const noexcept { return sample_; }
  long epoch() const noexcept { return epoch_; }
  long batch() const noexcept { return batch_; }

 private:
  long sample_;
  long epoch_;
  long batch_;
};

/// Non-finite values supplied as model input.
class NumericInputError : public NumericError {
 public:
  explicit NumericInputError(const std::string& what) : NumericError(what) {}
};

class PoleError : public NumericError {
 public:
  explicit PoleError(const std::string& what) : NumericError(what) {}
};

class SaturationError : public NumericError {
 public:
  explicit SaturationError(const std::string& what) : NumericError(what) {}
};

inline int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return 1;
    case ErrorCategory::Data: return 2;
    case ErrorCategory::Numeric: return 3;
  }
  return 1;
}

}  // namespace rosmm
