#include "specuq/covariance.hpp"

#include <cmath>

namespace specuq {

LowRankCovariance low_rank_from_samples(const Mat& D, double scale, double rel_tol) {
  LowRankCovariance out;
  out.scale = scale;
  if (D.cols() == 0 || D.rows() == 0) {
    out.factor = Mat::Zero(D.rows(), 0);
    return out;
  }
  const bool wide = D.cols() > D.rows();
  const Mat gram = wide ? Mat(D * D.transpose()) : Mat(D.transpose() * D);
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  const Vec& w = eig.eigenvalues();
  const double cut = rel_tol * std::max(w.maxCoeff(), 0.0);
  Index keep = 0;
  for (Index i = 0; i < w.size(); ++i) keep += w[i] > cut ? 1 : 0;
  const Mat V = eig.eigenvectors().rightCols(keep);
  if (wide) {
    out.factor = V * w.tail(keep).cwiseSqrt().asDiagonal();
  } else {
    out.factor = D * V;
  }
  return out;
}

Mat apply_block_weight(const SpMat& W, Index m, const Mat& X) {
  const Index n = W.rows();
  require(X.rows() == n * m, ErrorKind::Contract, "block weight dimension mismatch");
  Mat out(X.rows(), X.cols());
  for (Index j = 0; j < m; ++j) out.middleRows(j * n, n) = W * X.middleRows(j * n, n);
  return out;
}

double weighted_difference_norm(const LowRankCovariance& a, const LowRankCovariance& b, const SpMat& W, Index m) {
  require(a.dim() == b.dim() || a.rank() == 0 || b.rank() == 0, ErrorKind::Contract,
          "covariances have different dimensions");
  const Index dim = a.rank() > 0 ? a.dim() : b.dim();
  Mat Z(dim, a.rank() + b.rank());
  if (a.rank() > 0) Z.leftCols(a.rank()) = std::sqrt(std::abs(a.scale)) * a.factor;
  if (b.rank() > 0) Z.rightCols(b.rank()) = std::sqrt(std::abs(b.scale)) * b.factor;
  Vec sign(Z.cols());
  sign.head(a.rank()).setConstant(a.scale >= 0 ? 1.0 : -1.0);
  sign.tail(b.rank()).setConstant(b.scale >= 0 ? -1.0 : 1.0);
  const Mat G = Z.transpose() * apply_block_weight(W, m, Z);
  // ||Z S Z^T||_W^2 = trace(S G S G)
  const Mat SG = sign.asDiagonal() * G;
  return std::sqrt(std::max(0.0, (SG.cwiseProduct(SG.transpose())).sum()));
}

double project_psd(Mat& C) {
  C = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(C);
  const Vec& w = eig.eigenvalues();
  if (w.minCoeff() >= 0.0) return 0.0;
  const double clipped = -w.minCoeff();
  C = eig.eigenvectors() * w.cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  C = 0.5 * (C + C.transpose());
  return clipped;
}

}  // namespace specuq
