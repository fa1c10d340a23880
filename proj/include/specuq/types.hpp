#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace specuq {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

enum class ErrorKind {
  InvalidMesh,
  NotSpsd,
  RankExhausted,
  Configuration,
  Definiteness,
  Numerical,
  Contract,
  SaddleSingular,
  AlignmentRejected,
  AmplitudeTooLarge,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when pivoted Cholesky hits its rank cap before the trace tolerance.
class RankExhaustedError : public Error {
 public:
  RankExhaustedError(const std::string& what, double achieved_error)
      : Error(ErrorKind::RankExhausted, what), achieved_error_(achieved_error) {}

  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace specuq
