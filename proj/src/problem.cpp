#include "specuq/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace specuq {

GevpResult solve_reference(const Mesh& mesh, const SpMat& A, const SpMat& M, Index count) {
  if (A.rows() <= 2500) return solve_gevp(A, M, count);
  // analytic modes sin(p pi x) sin(q pi y) ordered by p^2 + q^2
  std::vector<std::pair<int, int>> pq;
  for (int p = 1; p <= 12; ++p)
    for (int q = 1; q <= 12; ++q) pq.emplace_back(p, q);
  std::stable_sort(pq.begin(), pq.end(), [](auto a, auto b) {
    return a.first * a.first + a.second * a.second < b.first * b.first + b.second * b.second;
  });
  const Index cols = std::min<Index>(count + 3, static_cast<Index>(pq.size()));
  Mat X0(A.rows(), cols);
  for (Index j = 0; j < cols; ++j) {
    const auto [p, q] = pq[static_cast<std::size_t>(j)];
    for (Index i = 0; i < A.rows(); ++i) {
      const auto& x = mesh.nodes[static_cast<std::size_t>(mesh.free_nodes[static_cast<std::size_t>(i)])];
      X0(i, j) = std::sin(p * std::numbers::pi * x.x()) * std::sin(q * std::numbers::pi * x.y());
    }
  }
  LobpcgOptions opts;
  opts.tol = 1e-12;
  opts.guard = cols - count;
  return solve_gevp_lobpcg(A, M, count, X0, cholesky_preconditioner(A), opts);
}

Problem::Problem(const ProblemConfig& config) : config_(config) {
  mesh_ = std::make_unique<Mesh>(build_unit_square_mesh(config.N));
  assembler_ = std::make_unique<P1Assembler>(*mesh_);
  const NodalField one = NodalField::constant(*mesh_, 1.0);
  A0_ = assembler_->stiffness(one);
  M0_ = assembler_->mass(one);

  const SpMat full_mass = assembler_->mass(one, DofSet::All);
  kl_mu_ = build_kl(*mesh_, KernelSpec::gaussian(config.kernel_scale), full_mass, config.kl_tol, config.kl_max_rank);
  if (config.kl_truncate > 0 && config.kl_truncate < kl_mu_.rank()) {
    kl_mu_.modes = kl_mu_.modes.leftCols(config.kl_truncate).eval();
    kl_mu_.sigmas = kl_mu_.sigmas.head(config.kl_truncate).eval();
  }
  kl_mu_.seed_policy_stream = kMuChannel;
  kl_eps_ = kl_mu_;
  kl_eps_.seed_policy_stream = kEpsChannel;
  for (Index i = 0; i < kl_mu_.rank(); ++i) {
    mode_A_.push_back(assembler_->stiffness(NodalField{kl_mu_.modes.col(i)}));
    mode_M_.push_back(assembler_->mass(NodalField{kl_eps_.modes.col(i)}));
  }

  require(config.target_index >= 0, ErrorKind::Configuration, "target index must be nonnegative");
  reference_ = solve_reference(*mesh_, A0_, M0_, std::min<Index>(config.target_index + 6, A0_.rows()));
  cluster_ = make_cluster(reference_, config.target_index, config.cluster_tol);
  sample_count_ = cluster_.indices.back() + 1;
  saddle_ = std::make_unique<SaddleSystem>(A0_, M0_, cluster_);
  precond_ = cholesky_preconditioner(A0_);
}

Realization Problem::realization(std::uint64_t index) const {
  RandomStream mu(config_.seed, index, kMuChannel);
  RandomStream eps(config_.seed, index, kEpsChannel);
  return {mu.uniform_centered(kl_mu_.rank()), eps.uniform_centered(kl_eps_.rank())};
}

SpMat Problem::combine(const std::vector<SpMat>& modes, const Vec& z) const {
  require(z.size() == static_cast<Index>(modes.size()), ErrorKind::Contract, "coefficient length must equal KL rank");
  SpMat out = A0_;  // same free-DOF pattern as every mode matrix
  Eigen::Map<Vec> values(out.valuePtr(), out.nonZeros());
  values.setZero();
  for (std::size_t i = 0; i < modes.size(); ++i) {
    values += z[static_cast<Index>(i)] * Eigen::Map<const Vec>(modes[i].valuePtr(), modes[i].nonZeros());
  }
  return out;
}

SpMat Problem::stiffness_direction(const Vec& z_mu) const { return combine(mode_A_, z_mu); }
SpMat Problem::mass_direction(const Vec& z_eps) const { return combine(mode_M_, z_eps); }

double Problem::min_coefficient(const Realization& r, double alpha, double beta) const {
  const double mu = (kl_mu_.mean + alpha * kl_mu_.fluctuation(r.z_mu).values.array()).minCoeff();
  const double eps = (kl_eps_.mean + beta * kl_eps_.fluctuation(r.z_eps).values.array()).minCoeff();
  return std::min(mu, eps);
}

SampleSolution Problem::solve_sample(const Realization& r, double alpha, double beta, bool dense) const {
  const double cmin = min_coefficient(r, alpha, beta);
  require(cmin > 0.0, ErrorKind::Definiteness,
          "perturbed coefficient not strictly positive (min " + std::to_string(cmin) + ")");
  SpMat A = A0_;
  SpMat M = M0_;
  if (alpha != 0.0) A += alpha * stiffness_direction(r.z_mu);
  if (beta != 0.0) M += beta * mass_direction(r.z_eps);

  GevpResult sol;
  if (dense) {
    sol = solve_gevp(A, M, sample_count_);
  } else {
    LobpcgOptions opts;
    opts.tol = config_.sample_tol;
    opts.guard = 2;
    const Index start = std::min<Index>(reference_.vectors.cols(), sample_count_ + opts.guard);
    sol = solve_gevp_lobpcg(A, M, sample_count_, reference_.vectors.leftCols(start), precond_, opts);
  }
  SampleSolution out;
  out.values = sol.values;
  out.iterations = sol.iterations;
  out.basis.resize(n(), m());
  out.lambda = Mat::Zero(m(), m());
  for (Index j = 0; j < m(); ++j) out.basis.col(j) = sol.vectors.col(cluster_.indices[static_cast<std::size_t>(j)]);
  if (m() > 1) {
    const Vec ritz = refine_in_span(A, M, out.basis);
    out.lambda.diagonal() = ritz;
    for (Index j = 0; j < m(); ++j) out.values[cluster_.indices[static_cast<std::size_t>(j)]] = ritz[j];
  } else {
    out.lambda(0, 0) = sol.values[cluster_.indices.front()];
  }
  return out;
}

Problem::Bundles Problem::derivatives(const Realization& r) const {
  const SpMat A1 = stiffness_direction(r.z_mu);
  const SpMat M1 = mass_direction(r.z_eps);
  return {saddle_->solve(mu_rhs(cluster_, A1), Direction::Mu),
          saddle_->solve(eps_rhs(cluster_, M1, config_.gauge), Direction::Eps)};
}

}  // namespace specuq
