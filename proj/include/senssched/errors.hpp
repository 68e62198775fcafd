#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace senssched {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a symmetric factorization fails. `block_index` names the
/// failing pivot block (0 for dense matrices) and `min_eigenvalue` is the
/// smallest eigenvalue of the offending pivot, computed only on failure.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string &what, std::size_t block_index,
                      double min_eigenvalue)
      : Error(what), block_index_(block_index), min_eigenvalue_(min_eigenvalue) {}

  std::size_t block_index() const { return block_index_; }
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  std::size_t block_index_;
  double min_eigenvalue_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidParams : public Error {
 public:
  using Error::Error;
};

/// The prior does not carry the representation a formula needs.
class WrongForm : public Error {
 public:
  using Error::Error;
};

/// Enumeration would exceed the configured cap.
class TooLarge : public Error {
 public:
  using Error::Error;
};

/// Computed marginal gains contradict monotonicity beyond round-off.
class OracleInconsistency : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string &field, const std::string &message)
      : Error(field + ": " + message), field_(field) {}

  const std::string &field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace senssched
