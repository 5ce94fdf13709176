#include "acbc/error.hpp"

namespace acbc {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Config: return "config";
    case ErrorKind::Richness: return "richness";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::LevelSeparation: return "level_separation";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace acbc
