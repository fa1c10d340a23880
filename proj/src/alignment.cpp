#include "specuq/alignment.hpp"

#include <numeric>

namespace specuq {

AlignmentResult align(const Mat& perturbed_basis, const Mat& perturbed_lambda, const Mat& reference_basis,
                      const SpMat& M0, double min_singular) {
  const Index m = reference_basis.cols();
  require(perturbed_basis.rows() == reference_basis.rows() && perturbed_basis.cols() == m &&
              perturbed_lambda.rows() == m && perturbed_lambda.cols() == m && M0.rows() == reference_basis.rows(),
          ErrorKind::Contract, "alignment dimension mismatch");
  const Mat G = perturbed_basis.transpose() * (M0 * reference_basis);
  Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  AlignmentResult r;
  r.singulars = svd.singularValues();
  if (r.singulars.minCoeff() < min_singular) {
    throw Error(ErrorKind::AlignmentRejected,
                "perturbed subspace rotated too far: min singular value " + std::to_string(r.singulars.minCoeff()));
  }
  r.rotation = svd.matrixU() * svd.matrixV().transpose();
  r.aligned_basis = perturbed_basis * r.rotation;
  r.aligned_lambda = r.rotation.transpose() * perturbed_lambda * r.rotation;
  return r;
}

PolarAlignment pairwise_polar_align(const Mat& sample_basis, const Vec& sample_lambda,
                                    const PolarizedPrediction& prediction, const SpMat& M0) {
  const Index m = sample_basis.cols();
  require(prediction.basis.cols() == m && sample_lambda.size() == m, ErrorKind::Contract,
          "polar alignment dimension mismatch");
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sample_lambda[a] < sample_lambda[b]; });
  PolarAlignment out;
  out.basis.resize(sample_basis.rows(), m);
  out.lambda_diag.resize(m);
  const Mat MP = M0 * prediction.basis;
  for (Index j = 0; j < m; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    Vec col = sample_basis.col(src);
    if (col.dot(MP.col(j)) < 0.0) col = -col;
    out.basis.col(j) = col;
    out.lambda_diag[j] = sample_lambda[src];
  }
  return out;
}

}  // namespace specuq
