#include "specuq/types.hpp"

namespace specuq {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidMesh: return "invalid mesh";
    case ErrorKind::NotSpsd: return "matrix not SPSD";
    case ErrorKind::RankExhausted: return "rank exhausted";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::Definiteness: return "definiteness error";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::Contract: return "contract violation";
    case ErrorKind::SaddleSingular: return "saddle-point system singular";
    case ErrorKind::AlignmentRejected: return "subspace rotated too far";
    case ErrorKind::AmplitudeTooLarge: return "amplitude too large";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

}  // namespace specuq
