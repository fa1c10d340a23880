#include "specuq/eig_core.hpp"

#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

namespace specuq {

namespace {

Vec residual_norms(const SpMat& A, const SpMat& M, const Vec& values, const Mat& X) {
  const Mat R = A * X - (M * X) * values.asDiagonal();
  return R.colwise().norm().transpose();
}

// Coefficients C with (S C)^T M (S C) = I, given G = S^T M S; near-dependent
// directions are dropped.
Mat orthonormalizing_coefficients(const Mat& G0) {
  Mat C = Mat::Identity(G0.rows(), G0.cols());
  Mat G = 0.5 * (G0 + G0.transpose());
  for (int pass = 0; pass < 2; ++pass) {
    Vec d = G.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (Index i = 0; i < d.size(); ++i) d[i] = d[i] > 0.0 ? 1.0 / d[i] : 0.0;
    const Mat Gs = d.asDiagonal() * G * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat> eig(Gs);
    const Vec& w = eig.eigenvalues();
    const double floor = 1e-13 * std::max(w.maxCoeff(), 0.0);
    Index keep = 0;
    for (Index i = 0; i < w.size(); ++i) keep += w[i] > floor ? 1 : 0;
    const Index first = w.size() - keep;
    Mat step = d.asDiagonal() * eig.eigenvectors().rightCols(keep);
    for (Index i = 0; i < keep; ++i) step.col(i) /= std::sqrt(w[first + i]);
    C = C * step;
    G = step.transpose() * G * step;
    G = 0.5 * (G + G.transpose());
  }
  return C;
}

// Block with its images under A and M, kept in step.
struct Block {
  Mat X, AX, MX;
  Index cols() const { return X.cols(); }
};

Block make_block(const SpMat& A, const SpMat& M, Mat X) {
  Block b;
  b.AX = A * X;
  b.MX = M * X;
  b.X = std::move(X);
  return b;
}

Block times(const Block& b, const Mat& C) { return {b.X * C, b.AX * C, b.MX * C}; }

struct Ritz {
  Vec values;
  Mat coeffs;  // in terms of the block columns
};

// Rayleigh-Ritz over span(S) using only small Gram matrices.
Ritz rayleigh_ritz(const Block& S, Index p) {
  const Mat C = orthonormalizing_coefficients(S.X.transpose() * S.MX);
  Mat H = C.transpose() * (S.X.transpose() * S.AX) * C;
  H = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(H);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "Rayleigh-Ritz eigenproblem failed");
  const Index take = std::min(p, H.cols());
  return {eig.eigenvalues().head(take), C * eig.eigenvectors().leftCols(take)};
}

}  // namespace

GevpResult solve_gevp(const SpMat& A, const SpMat& M, Index count) {
  require(A.rows() == A.cols() && M.rows() == M.cols() && A.rows() == M.rows(), ErrorKind::Contract,
          "pencil matrices must be square and of equal size");
  const Index n = A.rows();
  require(count >= 1 && count <= n, ErrorKind::Contract, "eigenpair count out of range");
  const Mat Md(M);
  Eigen::LLT<Mat> llt(Md);
  require(llt.info() == Eigen::Success, ErrorKind::Definiteness, "mass matrix is not positive definite");
  const Mat half = llt.matrixL().solve(Mat(A));
  Mat C = llt.matrixL().solve(Mat(half.transpose()));
  C = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(C);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "dense eigensolver did not converge");
  require(eig.eigenvalues()[0] > 0.0, ErrorKind::Definiteness, "stiffness matrix is not positive definite");

  GevpResult out;
  out.values = eig.eigenvalues().head(count);
  out.vectors = llt.matrixU().solve(eig.eigenvectors().leftCols(count));
  out.residuals = residual_norms(A, M, out.values, out.vectors);
  for (Index i = 0; i < count; ++i) {
    const double scale = out.values[i] * std::max(1.0, (M * out.vectors.col(i)).norm());
    require(out.residuals[i] <= 1e-9 * scale, ErrorKind::Numerical,
            "dense eigenpair residual " + std::to_string(out.residuals[i]) + " too large");
  }
  return out;
}

Vec refine_in_span(const SpMat& A, const SpMat& M, Mat& X) {
  Mat a = X.transpose() * (A * X);
  Mat b = X.transpose() * (M * X);
  a = 0.5 * (a + a.transpose());
  b = 0.5 * (b + b.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> eig(a, b);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "Rayleigh-Ritz refinement failed");
  X = X * eig.eigenvectors();
  return eig.eigenvalues();
}

Preconditioner cholesky_preconditioner(const SpMat& A) {
  auto solver = std::make_shared<Eigen::SimplicialLLT<SpMat>>(A);
  require(solver->info() == Eigen::Success, ErrorKind::Definiteness,
          "preconditioner matrix is not positive definite");
  return [solver](const Mat& R) -> Mat { return solver->solve(R); };
}

GevpResult solve_gevp_lobpcg(const SpMat& A, const SpMat& M, Index count, const Mat& X0,
                             const Preconditioner& precond, const LobpcgOptions& opts) {
  const Index n = A.rows();
  require(A.cols() == n && M.rows() == n && M.cols() == n, ErrorKind::Contract,
          "pencil matrices must be square and of equal size");
  require(count >= 1 && X0.rows() == n && X0.cols() >= count, ErrorKind::Contract,
          "initial block must have n rows and at least count columns");
  const Index p = std::min(n, std::max(X0.cols(), count + opts.guard));

  Mat start(n, p);
  const Index given = std::min(X0.cols(), p);
  start.leftCols(given) = X0.leftCols(given);
  for (Index j = given; j < p; ++j) {
    for (Index i = 0; i < n; ++i) start(i, j) = std::sin(0.7321 * static_cast<double>((i + 1) * (j + 1)));
  }

  const Block S0 = make_block(A, M, start);
  Ritz ritz = rayleigh_ritz(S0, p);
  require(ritz.coeffs.cols() == p, ErrorKind::Numerical, "initial LOBPCG block is rank deficient");
  Block X = times(S0, ritz.coeffs);
  Vec theta = ritz.values;
  Block P;

  GevpResult out;
  for (int it = 0; it <= opts.max_iter; ++it) {
    if (it > 0 && it % 20 == 0) X = make_block(A, M, X.X);  // limit drift of the implicit images
    const Mat R = X.AX - X.MX * theta.asDiagonal();
    bool done = true;
    for (Index i = 0; i < count; ++i) {
      if (R.col(i).norm() > opts.tol * std::abs(theta[i]) * X.MX.col(i).norm()) done = false;
    }
    out.iterations = it;
    if (done) break;
    if (it == opts.max_iter) {
      throw Error(ErrorKind::Numerical, "LOBPCG did not converge in " + std::to_string(opts.max_iter) +
                                            " iterations; max residual " +
                                            std::to_string(R.leftCols(count).colwise().norm().maxCoeff()));
    }
    const Block W = make_block(A, M, precond ? precond(R) : R);
    const Index q = X.cols() + W.cols() + P.cols();
    Block S{Mat(n, q), Mat(n, q), Mat(n, q)};
    S.X << X.X, W.X, P.X;
    S.AX << X.AX, W.AX, P.AX;
    S.MX << X.MX, W.MX, P.MX;
    ritz = rayleigh_ritz(S, p);
    require(ritz.coeffs.cols() == p, ErrorKind::Numerical, "LOBPCG search space collapsed");
    Mat search = ritz.coeffs;
    search.topRows(X.cols()).setZero();
    P = times(S, search);
    X = times(S, ritz.coeffs);
    theta = ritz.values;
  }
  require(theta[0] > 0.0, ErrorKind::Definiteness, "nonpositive eigenvalue: pencil is not definite");

  out.values = theta.head(count);
  out.vectors = X.X.leftCols(count);
  out.residuals = residual_norms(A, M, out.values, out.vectors);
  return out;
}

std::vector<Index> detect_cluster(const Vec& eigenvalues, Index target, double rel_tol) {
  require(target >= 0 && target < eigenvalues.size(), ErrorKind::Contract, "cluster target out of range");
  Index lo = target;
  Index hi = target;
  // sorted input: the pairwise condition reduces to the spread of the ends
  auto fits = [&](Index a, Index b) {
    return std::abs(eigenvalues[b] - eigenvalues[a]) <=
           rel_tol * std::min(std::abs(eigenvalues[a]), std::abs(eigenvalues[b]));
  };
  bool grown = true;
  while (grown) {
    grown = false;
    if (lo > 0 && fits(lo - 1, hi)) {
      --lo;
      grown = true;
    }
    if (hi + 1 < eigenvalues.size() && fits(lo, hi + 1)) {
      ++hi;
      grown = true;
    }
  }
  std::vector<Index> out;
  for (Index i = lo; i <= hi; ++i) out.push_back(i);
  return out;
}

Mat fix_signs(const Mat& basis) {
  Mat out = basis;
  for (Index j = 0; j < out.cols(); ++j) {
    Index arg = 0;
    out.col(j).cwiseAbs().maxCoeff(&arg);
    if (out(arg, j) < 0.0) out.col(j) = -out.col(j);
  }
  return out;
}

EigenCluster make_cluster(const GevpResult& solution, Index target, double rel_tol) {
  const auto idx = detect_cluster(solution.values, target, rel_tol);
  require(idx.back() + 1 < solution.values.size() || solution.values.size() == solution.vectors.rows(),
          ErrorKind::Contract, "cluster touches the end of the computed spectrum; request more eigenpairs");
  EigenCluster c;
  c.indices = idx;
  c.m = static_cast<Index>(idx.size());
  c.basis.resize(solution.vectors.rows(), c.m);
  c.member_values.resize(c.m);
  for (Index j = 0; j < c.m; ++j) {
    c.basis.col(j) = solution.vectors.col(idx[static_cast<std::size_t>(j)]);
    c.member_values[j] = solution.values[idx[static_cast<std::size_t>(j)]];
  }
  c.basis = fix_signs(c.basis);
  c.lambda0 = c.member_values.mean();
  return c;
}

std::string eigenpairs_to_json(const GevpResult& solution, const EigenCluster& cluster) {
  nlohmann::json j;
  j["lambdas"] = std::vector<double>(solution.values.data(), solution.values.data() + solution.values.size());
  j["n"] = solution.vectors.rows();
  j["vectors"] =
      std::vector<double>(solution.vectors.data(), solution.vectors.data() + solution.vectors.size());
  j["m"] = cluster.m;
  j["cluster"] = {{"indices", cluster.indices},
                  {"lambda0", cluster.lambda0},
                  {"member_values", std::vector<double>(cluster.member_values.data(),
                                                        cluster.member_values.data() + cluster.m)}};
  return j.dump();
}

}  // namespace specuq
