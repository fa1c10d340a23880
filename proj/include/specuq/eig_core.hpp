#pragma once

#include "specuq/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace specuq {

struct GevpResult {
  Vec values;     ///< ascending
  Mat vectors;    ///< M-orthonormal columns
  Vec residuals;  ///< ||A u - lambda M u||_2 per pair
  int iterations = 0;
};

/// Dense solve of A u = lambda M u via Cholesky reduction of M.
GevpResult solve_gevp(const SpMat& A, const SpMat& M, Index count);

/// Applies an approximate inverse of A to a block of vectors.
using Preconditioner = std::function<Mat(const Mat&)>;

/// Sparse Cholesky of an SPD matrix wrapped as a preconditioner.
Preconditioner cholesky_preconditioner(const SpMat& A);

struct LobpcgOptions {
  double tol = 1e-10;  ///< on ||r_i||_2 / (lambda_i ||M u_i||_2)
  int max_iter = 300;
  Index guard = 2;     ///< extra block vectors beyond count
};

/// Block LOBPCG for the smallest `count` eigenpairs.
///
/// X0 supplies at least count columns of initial guess; missing guard
/// columns are filled deterministically.
GevpResult solve_gevp_lobpcg(const SpMat& A, const SpMat& M, Index count, const Mat& X0,
                             const Preconditioner& precond, const LobpcgOptions& opts = {});

/// Maximal contiguous index set around target whose spread is within rel_tol.
std::vector<Index> detect_cluster(const Vec& eigenvalues, Index target, double rel_tol = 1e-6);

/// Make the largest-magnitude entry of each column positive (lowest index on ties).
Mat fix_signs(const Mat& basis);

/// Rayleigh-Ritz inside span(X): replaces X by M-orthonormal Ritz vectors and
/// returns the ascending Ritz values. Within a narrowly split cluster this
/// resolves the individual eigenvectors to accuracy ~ eps * lambda / gap
/// instead of eps * ||A|| / gap.
Vec refine_in_span(const SpMat& A, const SpMat& M, Mat& X);

struct EigenCluster {
  double lambda0 = 0.0;  ///< mean of member eigenvalues
  Index m = 0;
  Mat basis;             ///< n x m
  std::vector<Index> indices;
  Vec member_values;
};

EigenCluster make_cluster(const GevpResult& solution, Index target, double rel_tol = 1e-6);

std::string eigenpairs_to_json(const GevpResult& solution, const EigenCluster& cluster);

}  // namespace specuq
