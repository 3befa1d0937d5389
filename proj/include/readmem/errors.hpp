#ifndef READMEM_ERRORS_HPP
#define READMEM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace readmem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or ShapeSpec disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Normalizing a key whose flattened vector is zero.
class ZeroNormError : public Error {
 public:
  using Error::Error;
};

class EmptyMemoryError : public Error {
 public:
  using Error::Error;
};

/// Attempt to substitute or evict the annotated slot.
class ProtectedSlotError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Frame indices passed to observe() must be strictly increasing.
class FrameOrderError : public Error {
 public:
  using Error::Error;
};

class NotSymmetricError : public Error {
 public:
  using Error::Error;
};

/// Malformed stream container (bad magic, version, truncation).
class ContainerError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive oracle asked to solve an instance above its size budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace readmem

#endif  // READMEM_ERRORS_HPP
