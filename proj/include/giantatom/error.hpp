#pragma once

#include <stdexcept>
#include <string>

namespace giantatom {

enum class ErrorKind {
  InvalidArgument,
  UvDivergence,
  NotEvenProfile,
  NonHermitian,
  ZeroStartVector,
  NonOrthonormal,
  DecoupledEmitter,
  DimensionMismatch,
  Unsupported,
  LayoutMismatch,
  InvalidDarkState,
  DimensionCapExceeded,
  NotNormalized,
  ResourceCapExceeded,
  InvalidConfig,
  NumericalFailure,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace giantatom
