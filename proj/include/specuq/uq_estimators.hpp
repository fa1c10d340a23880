#pragma once

#include "specuq/covariance.hpp"
#include "specuq/problem.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace specuq {

struct MCConfig {
  Index samples = 1024;  ///< antithetic pairs count as two samples
  double alpha = 0.25;
  double beta = 0.25;
  bool antithetic = false;
  std::uint64_t first_index = 0;  ///< realization index of the first draw
  bool basis_covariance = false;
  double max_reject_fraction = 0.01;
  double min_singular = 0.5;
};

/// Column-major vectorization.
inline Vec vec(const Mat& x) { return Eigen::Map<const Vec>(x.data(), x.size()); }

Realization negated(const Realization& r);

struct AlignedSample {
  Mat lambda;  ///< m x m aligned eigenvalue matrix
  Mat basis;   ///< n x m aligned basis
  double min_singular = 1.0;
};

/// Solve and align one realization; nullopt (with reason) when it is rejected.
std::optional<AlignedSample> aligned_sample(const Problem& problem, const Realization& r, double alpha, double beta,
                                            double min_singular = 0.5, std::string* reason = nullptr);

/// Self-estimated RMSE of the sample mean of the columns of W:
/// sqrt((1/M^2) sum_i ||mean - w_i||^2), with an optional block weight I_m (x) weight.
double mc_rmse(const Mat& W, const SpMat* weight = nullptr, Index m = 1);

/// (1/d) sum_i (x_i - c)(x_i - c)^T with d = M - 1 when centred at the own mean, M otherwise.
Mat covariance_about(const Mat& X, const Vec& center, bool own_mean);

/// sqrt((1/M^2) sum_i ||C - (x_i - c)(x_i - c)^T||_F^2)
double covariance_rmse(const Mat& X, const Vec& center, const Mat& C);

struct MomentEstimate {
  Mat mean_lambda;  ///< m x m
  Mat mean_basis;   ///< n x m
  Mat cov_lambda;   ///< m^2 x m^2
  LowRankCovariance cov_basis;  ///< over vec(basis); empty unless requested
  bool has_cov_basis = false;
  double rmse_mean_lambda = 0.0;
  double rmse_mean_basis = 0.0;
  double rmse_cov_lambda = 0.0;
  Index samples = 0;
  Index rejected = 0;
  double psd_clip = 0.0;
  std::vector<double> min_singular;
  std::vector<std::string> rejection_log;
};

/// Monte Carlo moments of the aligned cluster eigenvalue matrix and basis.
///
/// Standard mode uses draws first_index .. first_index + samples - 1.
/// Antithetic mode averages (z, -z) pairs from draws first_index ..
/// first_index + samples/2 - 1 for the mean, and takes the covariance from
/// `samples` independent standard draws that follow them, centred at the
/// antithetic mean.
MomentEstimate mc_estimate(const Problem& problem, const MCConfig& config);

}  // namespace specuq
