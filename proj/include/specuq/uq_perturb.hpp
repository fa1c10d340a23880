#pragma once

#include "specuq/covariance.hpp"
#include "specuq/problem.hpp"

#include <vector>

namespace specuq {

/// First-order moments: E[lambda] ~ lambda0 I and E[u] ~ u0.
struct PerturbMean {
  Mat mean_lambda;
  Mat mean_basis;
};
PerturbMean perturb_mean(const EigenCluster& cluster);

/// Covariances of the eigenvalue-derivative matrices (m^2 x m^2, over vec).
struct EigCovDirect {
  Mat mu;
  Mat eps;
};

/// (1/12) sum_k vec(u0^T A_k u0) vec(.)^T and (lambda0^2/12) sum_k vec(u0^T M_k u0) vec(.)^T.
EigCovDirect eig_cov_direct(const EigenCluster& cluster, const std::vector<SpMat>& mode_stiffness,
                            const std::vector<SpMat>& mode_mass);

/// One factor column per KL mode: the saddle solution for that mode's
/// right-hand side, stacked as [vec(dU); vec(dLambda)] (length n m + m^2).
/// The represented covariance is scale * F F^T with scale = 1/12.
LowRankCovariance solve_covariance_equations(const SaddleSystem& saddle, const std::vector<SaddleRhs>& mode_rhs);

struct PerturbMoments {
  PerturbMean mean;
  EigCovDirect direct;
  LowRankCovariance cov_joint_mu;
  LowRankCovariance cov_joint_eps;
  Index n = 0;
  Index m = 0;

  /// Eigenvalue sub-block (last m^2 entries) and basis sub-block (first n m entries).
  Mat cov_lambda_mu() const;
  Mat cov_lambda_eps() const;
};

PerturbMoments perturb_moments(const Problem& problem);

struct CovPrediction {
  LowRankCovariance joint;  ///< alpha^2 Cov_mu + beta^2 Cov_eps as one factor
  Mat cov_lambda;           ///< m^2 x m^2
  LowRankCovariance cov_basis;
};

/// Dense Kronecker solve (K (x) K) vec(X_ij) = vec(Cov[b_i, b_j]) for every pair
/// of cluster columns, scattered into the solve_covariance_equations layout.
/// Memory grows like (n + m)^4; tiny meshes only.
Mat dense_covariance_oracle(const SpMat& A0, const SpMat& M0, const EigenCluster& cluster,
                            const std::vector<SaddleRhs>& mode_rhs);

CovPrediction perturb_cov(double alpha, double beta, const PerturbMoments& moments);

}  // namespace specuq
