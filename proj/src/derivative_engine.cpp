#include "specuq/derivative_engine.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace specuq {

namespace {

Mat sym(const Mat& x) { return 0.5 * (x + x.transpose()); }

}  // namespace

EigenvalueDerivatives eigenvalue_derivative(const EigenCluster& cluster, const SpMat& A1, const SpMat& M1,
                                            double lambda0) {
  const Mat& u0 = cluster.basis;
  const Index n = u0.rows();
  const Index m = u0.cols();
  require(A1.size() == 0 || (A1.rows() == n && A1.cols() == n), ErrorKind::Contract, "A1 dimension mismatch");
  require(M1.size() == 0 || (M1.rows() == n && M1.cols() == n), ErrorKind::Contract, "M1 dimension mismatch");
  EigenvalueDerivatives d;
  d.mu = A1.size() == 0 ? Mat::Zero(m, m) : sym(u0.transpose() * (A1 * u0));
  d.eps = M1.size() == 0 ? Mat::Zero(m, m) : sym(-lambda0 * (u0.transpose() * (M1 * u0)));
  return d;
}

SaddleRhs mu_rhs(const EigenCluster& cluster, const SpMat& A1) {
  require(A1.rows() == cluster.basis.rows(), ErrorKind::Contract, "A1 dimension mismatch");
  return {-(A1 * cluster.basis), Mat::Zero(cluster.m, cluster.m)};
}

SaddleRhs eps_rhs(const EigenCluster& cluster, const SpMat& M1, ConstraintGauge gauge) {
  require(M1.rows() == cluster.basis.rows(), ErrorKind::Contract, "M1 dimension mismatch");
  const Mat M1u0 = M1 * cluster.basis;
  Mat S = sym(cluster.basis.transpose() * M1u0);
  if (gauge == ConstraintGauge::DiagonalOnly) S = Mat(S.diagonal().asDiagonal());
  return {cluster.lambda0 * M1u0, -0.5 * S};
}

SaddleSystem::SaddleSystem(const SpMat& A0, const SpMat& M0, const EigenCluster& cluster)
    : n_(A0.rows()), m_(cluster.m), lambda0_(cluster.lambda0) {
  require(A0.cols() == n_ && M0.rows() == n_ && M0.cols() == n_ && cluster.basis.rows() == n_,
          ErrorKind::Contract, "saddle system dimension mismatch");
  const Mat M0u0 = M0 * cluster.basis;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(A0.nonZeros() + M0.nonZeros() + 2 * n_ * m_));
  const SpMat top_left = A0 - lambda0_ * M0;
  for (Index c = 0; c < top_left.outerSize(); ++c)
    for (SpMat::InnerIterator it(top_left, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (Index j = 0; j < m_; ++j) {
    for (Index i = 0; i < n_; ++i) {
      if (M0u0(i, j) == 0.0) continue;
      trip.emplace_back(i, n_ + j, -M0u0(i, j));
      trip.emplace_back(n_ + j, i, M0u0(i, j));
    }
  }
  K_.resize(n_ + m_, n_ + m_);
  K_.setFromTriplets(trip.begin(), trip.end());
  K_.makeCompressed();
  lu_ = std::make_shared<Eigen::SparseLU<SpMat>>();
  lu_->analyzePattern(K_);
  lu_->factorize(K_);
  require(lu_->info() == Eigen::Success, ErrorKind::SaddleSingular,
          "saddle-point matrix is singular: " + lu_->lastErrorMessage());
}

Mat SaddleSystem::solve_stacked(const Mat& rhs) const {
  require(rhs.rows() == n_ + m_, ErrorKind::Contract, "stacked right-hand side has wrong row count");
  Mat x = lu_->solve(rhs);
  require(lu_->info() == Eigen::Success, ErrorKind::SaddleSingular, "saddle-point solve failed");
  const double bnorm = rhs.norm();
  if (bnorm > 0.0) {
    const double res = (K_ * x - rhs).norm();
    require(res <= 1e-9 * bnorm, ErrorKind::SaddleSingular,
            "saddle-point residual " + std::to_string(res / bnorm) + " exceeds 1e-9 relative");
  }
  require(x.allFinite(), ErrorKind::SaddleSingular, "saddle-point solution is not finite");
  return x;
}

DerivativeBundle SaddleSystem::solve(const Mat& top, const Mat& bottom, Direction direction) const {
  require(top.rows() == n_ && top.cols() == m_ && bottom.rows() == m_ && bottom.cols() == m_, ErrorKind::Contract,
          "saddle right-hand side blocks have wrong shape");
  Mat rhs(n_ + m_, m_);
  rhs << top, bottom;
  const Mat x = solve_stacked(rhs);
  DerivativeBundle b;
  b.dU = x.topRows(n_);
  b.dLambda = x.bottomRows(m_);
  b.direction = direction;
  return b;
}

double constraint_residual(const EigenCluster& cluster, const SpMat& M0, const Mat& dU, const Mat& prescribed) {
  return (cluster.basis.transpose() * (M0 * dU) - prescribed).cwiseAbs().maxCoeff();
}

Polarization polarize(const Mat& dLambda) {
  require(dLambda.rows() == dLambda.cols(), ErrorKind::Contract, "polarize needs a square matrix");
  const Index m = dLambda.rows();
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym(dLambda));
  Polarization p;
  p.lambda_diag = eig.eigenvalues();
  const double scale = std::max(1.0, p.lambda_diag.cwiseAbs().maxCoeff());
  double min_gap = std::numeric_limits<double>::infinity();
  for (Index i = 1; i < m; ++i) min_gap = std::min(min_gap, p.lambda_diag[i] - p.lambda_diag[i - 1]);
  p.degenerate = m > 1 && min_gap < 1e-10 * scale;
  const bool isotropic = m > 1 && p.lambda_diag[m - 1] - p.lambda_diag[0] < 1e-10 * scale;
  p.Q0 = isotropic ? Mat(Mat::Identity(m, m)) : fix_signs(eig.eigenvectors());
  return p;
}

TaylorPrediction taylor_predict(const EigenCluster& cluster, const DerivativeBundle& mu,
                                const DerivativeBundle& eps, double alpha, double beta) {
  TaylorPrediction t;
  t.basis = cluster.basis + alpha * mu.dU + beta * eps.dU;
  t.lambda = cluster.lambda0 * Mat::Identity(cluster.m, cluster.m) + alpha * mu.dLambda + beta * eps.dLambda;
  return t;
}

PolarizedPrediction polarized_predict(const EigenCluster& cluster, const SpMat& M0, const SpMat& A1_mu,
                                      const SpMat& M1_eps, const DerivativeBundle& mu,
                                      const DerivativeBundle& eps, double alpha, double beta) {
  const Mat& u0 = cluster.basis;
  const Index m = cluster.m;
  const double lambda0 = cluster.lambda0;
  const Mat D = sym(alpha * mu.dLambda + beta * eps.dLambda);
  const Mat dU = alpha * mu.dU + beta * eps.dU;

  PolarizedPrediction out;
  out.polarization = polarize(D);
  const Mat& Q0 = out.polarization.Q0;
  const Vec& L1 = out.polarization.lambda_diag;

  // Along the ray, V1 = dU Q0 + u0 C. Orthonormality fixes the symmetric part
  // of Q0^T C; the second-order equation projected on u0 Q0 fixes the rest.
  const Mat S = beta * (u0.transpose() * (M1_eps * u0));
  const Mat St = Q0.transpose() * S * Q0;
  const Mat Gt = Q0.transpose() * (u0.transpose() * (M0 * dU)) * Q0;
  const Mat Ksym = -0.5 * (Gt + Gt.transpose() + St);
  const Mat W = alpha * (A1_mu * dU) - (beta * lambda0) * (M1_eps * dU);
  const Mat B = Q0.transpose() * (u0.transpose() * W) * Q0;

  Mat K = Mat::Zero(m, m);
  if (!out.polarization.degenerate) {
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < m; ++j) {
        if (i == j) continue;
        const double gap = L1[i] - L1[j];
        K(i, j) = (-B(i, j) - Ksym(i, j) * gap + (Gt(i, j) + St(i, j)) * L1[j]) / gap;
      }
    }
    K = 0.5 * (K - K.transpose());
  }
  out.rotation_rate = Q0 * (K + Ksym);
  out.basis = u0 * Q0 + dU * Q0 + u0 * out.rotation_rate;
  out.lambda_diag = L1.array() + lambda0;
  return out;
}

}  // namespace specuq
