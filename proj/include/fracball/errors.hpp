#pragma once

#include <stdexcept>
#include <string>

namespace fracball {

// Argument outside the documented domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Matrix cache file unreadable as a cache (bad magic, truncated payload).
class CorruptFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Field/matrix/cache built for a different mesh than the one supplied.
class MeshMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experiment or solve requested outside the regime where it is meaningful.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fracball
