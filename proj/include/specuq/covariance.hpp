#pragma once

#include "specuq/types.hpp"

namespace specuq {

/// Symmetric PSD matrix scale * factor * factor^T.
struct LowRankCovariance {
  Mat factor;  ///< dim x rank
  double scale = 1.0;

  Index dim() const { return factor.rows(); }
  Index rank() const { return factor.cols(); }
  Mat dense() const { return scale * factor * factor.transpose(); }
  /// Covariance of a contiguous sub-vector.
  LowRankCovariance rows(Index start, Index count) const {
    return {factor.middleRows(start, count), scale};
  }
};

/// Low-rank form of scale * D D^T, truncating eigenvalues below rel_tol * max.
LowRankCovariance low_rank_from_samples(const Mat& D, double scale, double rel_tol = 1e-8);

/// Apply I_m (x) W to a stacked block of m vectors of length W.rows().
Mat apply_block_weight(const SpMat& W, Index m, const Mat& X);

/// || a - b || in the Frobenius norm weighted by I_m (x) W on both sides,
/// i.e. the L2(D x D) norm of a covariance of m stacked nodal functions.
double weighted_difference_norm(const LowRankCovariance& a, const LowRankCovariance& b, const SpMat& W, Index m);

/// Symmetrize and clip negative eigenvalues; returns the magnitude of the most negative one removed.
double project_psd(Mat& C);

}  // namespace specuq
