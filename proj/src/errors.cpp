#include "aqc/errors.hpp"

namespace aqc {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Infeasible: return 1;
    case ErrorKind::InvalidInput: return 2;
    case ErrorKind::NumericalFailure:
    case ErrorKind::Structural: return 3;
  }
  return 3;
}

}  // namespace aqc
