#pragma once

#include "specuq/eig_core.hpp"
#include "specuq/types.hpp"

#include <Eigen/SparseLU>

#include <memory>

namespace specuq {

enum class Direction { Mu, Eps };

/// How the bottom block u0^T M0 dU is prescribed for the epsilon direction.
///
/// Symmetric: the full matrix -(1/2) u0^T M1 u0, which is what differentiating
/// u^T M u = I requires. DiagonalOnly keeps only its diagonal.
enum class ConstraintGauge { Symmetric, DiagonalOnly };

struct DerivativeBundle {
  Mat dU;       ///< n x m
  Mat dLambda;  ///< m x m
  Direction direction = Direction::Mu;
};

struct EigenvalueDerivatives {
  Mat mu;   ///< u0^T A1 u0
  Mat eps;  ///< -lambda0 u0^T M1 u0
};

/// Closed-form eigenvalue-derivative matrices; an empty (0 x 0) A1 or M1 means zero.
EigenvalueDerivatives eigenvalue_derivative(const EigenCluster& cluster, const SpMat& A1, const SpMat& M1,
                                            double lambda0);

struct SaddleRhs {
  Mat top;     ///< n x m
  Mat bottom;  ///< m x m
};

SaddleRhs mu_rhs(const EigenCluster& cluster, const SpMat& A1);
SaddleRhs eps_rhs(const EigenCluster& cluster, const SpMat& M1, ConstraintGauge gauge = ConstraintGauge::Symmetric);

/// Bordered system [[A0 - lambda0 M0, -M0 u0], [u0^T M0, 0]], factorized once.
class SaddleSystem {
 public:
  SaddleSystem(const SpMat& A0, const SpMat& M0, const EigenCluster& cluster);

  /// Column i of the result solves the system for right-hand side column i.
  DerivativeBundle solve(const Mat& top, const Mat& bottom, Direction direction) const;
  DerivativeBundle solve(const SaddleRhs& rhs, Direction direction) const {
    return solve(rhs.top, rhs.bottom, direction);
  }

  /// Raw solve of K X = B for stacked (n + m)-row blocks.
  Mat solve_stacked(const Mat& rhs) const;

  const SpMat& matrix() const { return K_; }
  Index n() const { return n_; }
  Index m() const { return m_; }
  double lambda0() const { return lambda0_; }

 private:
  Index n_;
  Index m_;
  double lambda0_;
  SpMat K_;
  std::shared_ptr<Eigen::SparseLU<SpMat>> lu_;
};

/// max |u0^T M0 dU - prescribed|
double constraint_residual(const EigenCluster& cluster, const SpMat& M0, const Mat& dU, const Mat& prescribed);

struct Polarization {
  Mat Q0;             ///< orthogonal, columns sign-fixed
  Vec lambda_diag;    ///< ascending eigenvalues of the input
  bool degenerate = false;
};

Polarization polarize(const Mat& dLambda);

struct TaylorPrediction {
  Mat basis;   ///< n x m
  Mat lambda;  ///< m x m
};

/// u0 + alpha dU_mu + beta dU_eps and lambda0 I + alpha dLambda_mu + beta dLambda_eps.
TaylorPrediction taylor_predict(const EigenCluster& cluster, const DerivativeBundle& mu,
                                const DerivativeBundle& eps, double alpha, double beta);

/// Polarized first-order prediction along the ray through (alpha, beta).
///
/// The basis includes the first-order rotation of the polarization,
/// u0 Q0 K with K skew, recovered from first-derivative data (linear
/// perturbations have no second parameter derivatives). Columns follow
/// the ascending eigenvalues of the directional derivative.
struct PolarizedPrediction {
  Polarization polarization;
  Mat basis;        ///< n x m
  Vec lambda_diag;  ///< lambda0 + ascending directional eigenvalues
  Mat rotation_rate;  ///< Q0 K (zero when degenerate)
};

PolarizedPrediction polarized_predict(const EigenCluster& cluster, const SpMat& M0, const SpMat& A1_mu,
                                      const SpMat& M1_eps, const DerivativeBundle& mu,
                                      const DerivativeBundle& eps, double alpha, double beta);

}  // namespace specuq
