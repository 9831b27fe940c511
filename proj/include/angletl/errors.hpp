#pragma once

#include <stdexcept>
#include <string>

namespace angletl {

// Base class for all library errors.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// File missing or unreadable.
class io_error : public error {
 public:
  using error::error;
};

// Malformed file content (ragged rows, non-numeric cells, bad JSON).
class format_error : public error {
 public:
  using error::error;
};

// Dimension mismatch between matrices/vectors.
class shape_error : public error {
 public:
  using error::error;
};

// Invalid parameter value (lambda <= 0, folds < 2, bad correlation, ...).
class parameter_error : public error {
 public:
  using error::error;
};

// Degenerate input data (zero vector where a direction is required).
class domain_error : public error {
 public:
  using error::error;
};

// Quantity requested outside its valid asymptotic regime.
class regime_error : public error {
 public:
  using error::error;
};

// Numerical failure: non-convergence, ill conditioning.
class numeric_error : public error {
 public:
  using error::error;
};

}  // namespace angletl
