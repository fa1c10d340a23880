#pragma once

#include "specuq/mesh.hpp"
#include "specuq/types.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace specuq {

/// Isotropic covariance kernel g(r).
struct KernelSpec {
  std::string name;
  double scale = 20.0;
  std::function<double(double)> evaluate;

  /// g(r) = exp(-r^2 / scale) / sqrt(scale * pi)
  static KernelSpec gaussian(double scale = 20.0);
};

struct PivotedCholeskyResult {
  Mat factor;                        ///< n x k
  std::vector<Index> pivots;         ///< pivot order
  double trace_error = 0.0;          ///< trace(C - L L^T) from updated diagonals
  std::vector<double> trace_history; ///< trace error after each pivot (k entries)
  Index rank() const { return factor.cols(); }
};

/// Greedy pivoted Cholesky of an SPSD matrix given entrywise.
///
/// Stops once the residual trace drops to trace_tol. Throws NotSpsd if an
/// updated diagonal goes below -trace_tol, and RankExhaustedError if
/// max_rank pivots do not reach the tolerance.
PivotedCholeskyResult pivoted_cholesky(Index n, const std::function<double(Index, Index)>& entry,
                                       double trace_tol, Index max_rank);

enum class CoefficientLaw { UniformCentered };  // U[-1/2, 1/2]

inline constexpr double kUniformVariance = 1.0 / 12.0;

/// Truncated KL model: field = mean + amplitude * sum_i z_i modes_i.
struct KLExpansion {
  double mean = 1.0;
  double amplitude = 1.0;
  Mat modes;   ///< n_nodes x k, column i = sqrt(sigma_i) phi_i
  Vec sigmas;  ///< descending
  CoefficientLaw law = CoefficientLaw::UniformCentered;
  double trace_error = 0.0;
  std::uint64_t seed_policy_stream = 0;  ///< RNG channel used for this field

  Index rank() const { return modes.cols(); }
  Index num_nodes() const { return modes.rows(); }

  /// mean + amplitude * modes * z
  NodalField field(const Vec& z) const;
  /// modes * z (the centred fluctuation without amplitude)
  NodalField fluctuation(const Vec& z) const;
  /// (1/2) * sum_i ||modes_i||_inf, a bound on ||fluctuation||_inf
  double sup_bound() const;
};

/// Reproducible per-sample random stream (splitmix64-seeded mt19937_64).
///
/// Streams are keyed by (master seed, sample index, channel), so any worker
/// can regenerate any sample.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t index, std::uint64_t channel);

  /// Uniform on [-1/2, 1/2), bitwise portable.
  double uniform_centered();
  Vec uniform_centered(Index count);
  double normal();

 private:
  std::mt19937_64 engine_;
};

struct FieldSample {
  NodalField field;
  Vec z;
};

/// Kernel collocation matrix g(|x_i - x_j|) over all mesh nodes, as an entry callback.
std::function<double(Index, Index)> nodal_kernel_entry(const Mesh& mesh, const KernelSpec& kernel);

/// KL modes from a Gram matrix over nodes and the full-node mass matrix.
///
/// With G ~ L L^T from pivoted Cholesky, the Galerkin kernel matrix is
/// C = M G M ~ (M L)(M L)^T; the k x k problem L^T M L phi~ = sigma phi~
/// gives modes sqrt(sigma) phi = L phi~.
KLExpansion build_kl_from_gram(Index num_nodes, const std::function<double(Index, Index)>& gram_entry,
                               const SpMat& full_mass, double trace_tol, Index max_rank = -1);

KLExpansion build_kl(const Mesh& mesh, const KernelSpec& kernel, const SpMat& full_mass,
                     double trace_tol, Index max_rank = -1);

FieldSample sample_field(const KLExpansion& kl, RandomStream& stream);

std::string kl_to_json(const KLExpansion& kl, std::uint64_t master_seed);
KLExpansion kl_from_json(const std::string& text);

}  // namespace specuq
