#include "giantatom/error.hpp"

namespace giantatom {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::UvDivergence: return "uv-divergence";
    case ErrorKind::NotEvenProfile: return "not-even-profile";
    case ErrorKind::NonHermitian: return "non-hermitian";
    case ErrorKind::ZeroStartVector: return "zero-start-vector";
    case ErrorKind::NonOrthonormal: return "non-orthonormal";
    case ErrorKind::DecoupledEmitter: return "decoupled-emitter";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::LayoutMismatch: return "layout-mismatch";
    case ErrorKind::InvalidDarkState: return "invalid-dark-state";
    case ErrorKind::DimensionCapExceeded: return "dimension-cap-exceeded";
    case ErrorKind::NotNormalized: return "not-normalized";
    case ErrorKind::ResourceCapExceeded: return "resource-cap-exceeded";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

}  // namespace giantatom
