#include "specuq/uq_perturb.hpp"

#include <unsupported/Eigen/KroneckerProduct>

namespace specuq {

PerturbMean perturb_mean(const EigenCluster& cluster) {
  return {cluster.lambda0 * Mat::Identity(cluster.m, cluster.m), cluster.basis};
}

EigCovDirect eig_cov_direct(const EigenCluster& cluster, const std::vector<SpMat>& mode_stiffness,
                            const std::vector<SpMat>& mode_mass) {
  const Mat& u0 = cluster.basis;
  const Index m2 = cluster.m * cluster.m;
  Mat Fmu(m2, static_cast<Index>(mode_stiffness.size()));
  Mat Feps(m2, static_cast<Index>(mode_mass.size()));
  for (std::size_t k = 0; k < mode_stiffness.size(); ++k) {
    const Mat d = u0.transpose() * (mode_stiffness[k] * u0);
    Fmu.col(static_cast<Index>(k)) = Eigen::Map<const Vec>(d.data(), m2);
  }
  for (std::size_t k = 0; k < mode_mass.size(); ++k) {
    const Mat d = u0.transpose() * (mode_mass[k] * u0);
    Feps.col(static_cast<Index>(k)) = Eigen::Map<const Vec>(d.data(), m2);
  }
  const double l0 = cluster.lambda0;
  return {Fmu * Fmu.transpose() / 12.0, (l0 * l0 / 12.0) * (Feps * Feps.transpose())};
}

LowRankCovariance solve_covariance_equations(const SaddleSystem& saddle, const std::vector<SaddleRhs>& mode_rhs) {
  const Index n = saddle.n();
  const Index m = saddle.m();
  const Index k = static_cast<Index>(mode_rhs.size());
  LowRankCovariance cov;
  cov.scale = 1.0 / 12.0;
  cov.factor.resize(n * m + m * m, k);
  if (k == 0) return cov;
  // all modes and cluster columns in one multi-right-hand-side solve
  Mat rhs(n + m, k * m);
  for (Index i = 0; i < k; ++i) {
    const auto& r = mode_rhs[static_cast<std::size_t>(i)];
    require(r.top.rows() == n && r.top.cols() == m && r.bottom.rows() == m && r.bottom.cols() == m,
            ErrorKind::Contract, "covariance right-hand side has wrong shape");
    rhs.block(0, i * m, n, m) = r.top;
    rhs.block(n, i * m, m, m) = r.bottom;
  }
  const Mat x = saddle.solve_stacked(rhs);
  for (Index i = 0; i < k; ++i) {
    const Mat dU = x.block(0, i * m, n, m);
    const Mat dL = x.block(n, i * m, m, m);
    cov.factor.col(i).head(n * m) = Eigen::Map<const Vec>(dU.data(), n * m);
    cov.factor.col(i).tail(m * m) = Eigen::Map<const Vec>(dL.data(), m * m);
  }
  require(cov.rank() <= k, ErrorKind::Contract, "covariance rank exceeds KL rank");
  return cov;
}

Mat PerturbMoments::cov_lambda_mu() const { return cov_joint_mu.rows(n * m, m * m).dense(); }
Mat PerturbMoments::cov_lambda_eps() const { return cov_joint_eps.rows(n * m, m * m).dense(); }

PerturbMoments perturb_moments(const Problem& problem) {
  PerturbMoments out;
  out.n = problem.n();
  out.m = problem.m();
  out.mean = perturb_mean(problem.cluster());
  std::vector<SpMat> A, M;
  std::vector<SaddleRhs> rhs_mu, rhs_eps;
  for (Index i = 0; i < problem.kl_rank(); ++i) {
    A.push_back(problem.mode_stiffness(i));
    M.push_back(problem.mode_mass(i));
    rhs_mu.push_back(mu_rhs(problem.cluster(), A.back()));
    rhs_eps.push_back(eps_rhs(problem.cluster(), M.back(), problem.config().gauge));
  }
  out.direct = eig_cov_direct(problem.cluster(), A, M);
  out.cov_joint_mu = solve_covariance_equations(problem.saddle(), rhs_mu);
  out.cov_joint_eps = solve_covariance_equations(problem.saddle(), rhs_eps);
  return out;
}

Mat dense_covariance_oracle(const SpMat& A0, const SpMat& M0, const EigenCluster& cluster,
                            const std::vector<SaddleRhs>& mode_rhs) {
  const Index n = A0.rows();
  const Index m = cluster.m;
  const Index s = n + m;
  require(s <= 80, ErrorKind::Configuration, "dense covariance oracle is limited to n + m <= 80");
  const Mat& u0 = cluster.basis;
  Mat K = Mat::Zero(s, s);
  K.topLeftCorner(n, n) = Mat(A0) - cluster.lambda0 * Mat(M0);
  K.topRightCorner(n, m) = -(M0 * u0);
  K.bottomLeftCorner(m, n) = (M0 * u0).transpose();
  const Eigen::PartialPivLU<Mat> lu(Mat(Eigen::kroneckerProduct(K, K)));

  auto slot = [&](Index col, Index row) { return row < n ? col * n + row : n * m + col * m + (row - n); };
  Mat out = Mat::Zero(n * m + m * m, n * m + m * m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      Mat cb = Mat::Zero(s, s);
      for (const auto& r : mode_rhs) {
        Vec bi(s), bj(s);
        bi << r.top.col(i), r.bottom.col(i);
        bj << r.top.col(j), r.bottom.col(j);
        cb += bi * bj.transpose() / 12.0;
      }
      const Vec x = lu.solve(Eigen::Map<const Vec>(cb.data(), s * s));
      for (Index c = 0; c < s; ++c)
        for (Index a = 0; a < s; ++a) out(slot(i, a), slot(j, c)) = x[c * s + a];
    }
  }
  return out;
}

CovPrediction perturb_cov(double alpha, double beta, const PerturbMoments& moments) {
  const auto& a = moments.cov_joint_mu;
  const auto& b = moments.cov_joint_eps;
  require(a.scale == b.scale, ErrorKind::Contract, "covariance factors must share a scale");
  CovPrediction p;
  p.joint.scale = a.scale;
  p.joint.factor.resize(std::max(a.dim(), b.dim()), a.rank() + b.rank());
  if (a.rank() > 0) p.joint.factor.leftCols(a.rank()) = alpha * a.factor;
  if (b.rank() > 0) p.joint.factor.rightCols(b.rank()) = beta * b.factor;
  const Index nm = moments.n * moments.m;
  const Index m2 = moments.m * moments.m;
  p.cov_lambda = p.joint.rows(nm, m2).dense();
  p.cov_basis = p.joint.rows(0, nm);
  return p;
}

}  // namespace specuq
