#pragma once

#include "specuq/derivative_engine.hpp"
#include "specuq/eig_core.hpp"
#include "specuq/field_model.hpp"
#include "specuq/mesh.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace specuq {

struct ProblemConfig {
  int N = 24;
  double kl_tol = 1e-5;
  double kernel_scale = 20.0;
  Index kl_max_rank = -1;
  Index kl_truncate = -1;  ///< keep only the leading modes when positive
  Index target_index = 1;
  double cluster_tol = 1e-6;
  std::uint64_t seed = 20240521;
  ConstraintGauge gauge = ConstraintGauge::Symmetric;
  double sample_tol = 1e-11;  ///< LOBPCG tolerance for perturbed solves
};

inline constexpr std::uint64_t kMuChannel = 0;
inline constexpr std::uint64_t kEpsChannel = 1;

/// One draw of both KL coefficient vectors.
struct Realization {
  Vec z_mu;
  Vec z_eps;
};

struct SampleSolution {
  Mat basis;   ///< n x m, columns at the reference cluster indices
  Mat lambda;  ///< m x m diagonal
  Vec values;  ///< all computed eigenvalues
  int iterations = 0;
};

/// Everything shared across samples: mesh, KL models, reference cluster,
/// per-mode operators, saddle factorization and the sampling preconditioner.
class Problem {
 public:
  explicit Problem(const ProblemConfig& config);
  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;

  const ProblemConfig& config() const { return config_; }
  const Mesh& mesh() const { return *mesh_; }
  const P1Assembler& assembler() const { return *assembler_; }
  const KLExpansion& kl_mu() const { return kl_mu_; }
  const KLExpansion& kl_eps() const { return kl_eps_; }
  const SpMat& A0() const { return A0_; }
  const SpMat& M0() const { return M0_; }
  const GevpResult& reference() const { return reference_; }
  const EigenCluster& cluster() const { return cluster_; }
  const SaddleSystem& saddle() const { return *saddle_; }
  Index n() const { return A0_.rows(); }
  Index m() const { return cluster_.m; }
  Index kl_rank() const { return kl_mu_.rank(); }

  /// Per-mode operators: stiffness of L_{mu,i}, mass of L_{eps,i}.
  const SpMat& mode_stiffness(Index i) const { return mode_A_[static_cast<std::size_t>(i)]; }
  const SpMat& mode_mass(Index i) const { return mode_M_[static_cast<std::size_t>(i)]; }

  Realization realization(std::uint64_t index) const;
  /// sum_i z_i A_{L_i} (the mu1 stiffness without amplitude)
  SpMat stiffness_direction(const Vec& z_mu) const;
  SpMat mass_direction(const Vec& z_eps) const;

  /// Smallest coefficient value over nodes of mu0 + alpha mu1 and eps0 + beta eps1.
  double min_coefficient(const Realization& r, double alpha, double beta) const;

  /// Perturbed eigenpairs at the reference cluster indices (never re-clustered).
  /// Throws Definiteness when a coefficient is not strictly positive.
  SampleSolution solve_sample(const Realization& r, double alpha, double beta, bool dense = false) const;

  struct Bundles {
    DerivativeBundle mu;
    DerivativeBundle eps;
  };
  Bundles derivatives(const Realization& r) const;

 private:
  SpMat combine(const std::vector<SpMat>& modes, const Vec& z) const;

  ProblemConfig config_;
  std::unique_ptr<Mesh> mesh_;
  std::unique_ptr<P1Assembler> assembler_;
  KLExpansion kl_mu_;
  KLExpansion kl_eps_;
  SpMat A0_, M0_;
  std::vector<SpMat> mode_A_, mode_M_;
  GevpResult reference_;
  EigenCluster cluster_;
  Index sample_count_ = 0;  ///< eigenpairs solved per sample
  std::unique_ptr<SaddleSystem> saddle_;
  Preconditioner precond_;
};

/// Reference eigenpairs: dense below 2500 DOFs, otherwise LOBPCG started
/// from interpolated analytic Dirichlet modes.
GevpResult solve_reference(const Mesh& mesh, const SpMat& A, const SpMat& M, Index count);

}  // namespace specuq
