#ifndef SDIT_ERRORS_HPP
#define SDIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sdit {

/// Invalid or inconsistent configuration (shapes, counts, weights).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (label range, shape mismatch).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values encountered in a computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset ingestion failure (missing directory, undecodable file).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupt or incompatible serialized artifact.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sdit

#endif  // SDIT_ERRORS_HPP
