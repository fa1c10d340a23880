#pragma once

#include "specuq/derivative_engine.hpp"
#include "specuq/types.hpp"

namespace specuq {

struct AlignmentResult {
  Mat rotation;        ///< m x m orthogonal, reflections allowed
  Mat aligned_basis;   ///< perturbed_basis * rotation
  Mat aligned_lambda;  ///< rotation^T * perturbed_lambda * rotation
  Vec singulars;       ///< singular values of the cross-mass matrix, descending
};

/// Rotate a perturbed cluster basis onto the reference basis.
///
/// G = perturbed^T M0 reference = U S V^T and rotation = U V^T, so that
/// aligned^T M0 reference = V S V^T is symmetric positive semidefinite.
/// Throws AlignmentRejected when the smallest singular value is below
/// min_singular.
AlignmentResult align(const Mat& perturbed_basis, const Mat& perturbed_lambda, const Mat& reference_basis,
                      const SpMat& M0, double min_singular = 0.5);

struct PolarAlignment {
  Mat basis;        ///< sample columns, ascending eigenvalue order, signs matched to the prediction
  Vec lambda_diag;  ///< ascending sample eigenvalues
};

/// Match an exact perturbed eigenbasis (ascending eigenvalues) to a polarized prediction column by column.
PolarAlignment pairwise_polar_align(const Mat& sample_basis, const Vec& sample_lambda,
                                    const PolarizedPrediction& prediction, const SpMat& M0);

}  // namespace specuq
