#pragma once

#include "specuq/io.hpp"
#include "specuq/problem.hpp"
#include "specuq/uq_estimators.hpp"
#include "specuq/uq_perturb.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace specuq {

struct ExperimentConfig {
  // problem
  int N = 24;
  double kl_tol = 1e-5;
  double kernel_scale = 20.0;
  Index kl_max_rank = -1;
  Index kl_truncate = -1;
  Index target_index = 1;
  double cluster_tol = 1e-6;
  std::uint64_t seed = 20240521;
  std::string gauge = "symmetric";  ///< or "diagonal"
  double sample_tol = 1e-9;

  // dyadic ray t = 2^e, alpha = alpha_weight t, beta = beta_weight t
  int t_min_exp = -15;
  int t_max_exp = 0;
  double alpha_weight = 1.0;
  double beta_weight = 1.0;
  Index fit_drop_small = 3;
  Index fit_drop_large = 2;

  // deterministic study and derivative checks
  std::uint64_t realization = 0;
  bool det_dense = true;
  double fd_step = 1e-2;

  // single Monte Carlo run and perturbation comparison
  double alpha = 0.25;
  double beta = 0.25;
  Index samples = 1024;
  bool antithetic = false;
  std::uint64_t first_index = 0;
  bool basis_covariance = false;
  std::string reference;  ///< moment dump used for err_* columns

  // Monte Carlo study: M = 2^mc_min_exp .. 2^mc_max_exp
  int mc_min_exp = 5;
  int mc_max_exp = 12;
  Index mc_repetitions = 20;

  // expansion study
  Index exp_reference_samples = 100000;
  std::vector<int> exp_t_exps = {-3, -4, -5, -6};
  double exp_noise_factor = 3.0;

  // timings
  std::vector<Index> timing_samples = {10000};

  // not hashed
  std::string output_dir = ".";
  bool assert_slopes = false;

  ProblemConfig problem() const;
  std::vector<double> t_grid() const;
  void validate() const;

  nlohmann::json to_json() const;  ///< hashed fields only
  static ExperimentConfig from_json(const nlohmann::json& j, const ExperimentConfig& base);
  static ExperimentConfig from_json(const nlohmann::json& j) { return from_json(j, ExperimentConfig{}); }
  std::string hash() const;
};

/// Volatile-free result of a study: a table plus named summary values.
struct StudyResult {
  CsvTable table;
  nlohmann::json summary;
  bool slopes_ok = true;
};

StudyResult run_deterministic_study(const Problem& problem, const ExperimentConfig& config);

/// Tolerance windows checked by --assert and by the acceptance tests.
struct SlopeWindow {
  double lo;
  double hi;
  bool contains(double s) const { return s >= lo && s <= hi; }
};
inline constexpr SlopeWindow kSecondOrder{1.7, 2.3};
inline constexpr SlopeWindow kMcRate{-0.6, -0.4};
inline constexpr SlopeWindow kFourthOrder{3.3, 4.5};

StudyResult run_mc_study(const Problem& problem, const ExperimentConfig& config);
StudyResult run_expansion_study(const Problem& problem, const ExperimentConfig& config);

/// Centered finite difference of the SVD-aligned cluster eigenvalue matrix along
/// (mu1, eps1) of one realization, compared with dLambda_mu + dLambda_eps at h and h/2.
struct FdCheck {
  double h = 0.0;
  double err_h = 0.0;
  double err_half = 0.0;
  double observed_order = 0.0;
};
FdCheck fd_check(const Problem& problem, const Realization& r, double h, bool dense);

nlohmann::json derivatives_report(const Problem& problem, const ExperimentConfig& config);

/// One Monte Carlo run as a CSV row plus a moment dump.
struct McRun {
  CsvTable table;
  nlohmann::json moments;
};
McRun run_mc(const Problem& problem, const ExperimentConfig& config);
nlohmann::json moments_to_json(const MomentEstimate& est, const MCConfig& mc);

/// Perturbation prediction, and comparison rows against a stored moment dump if given.
McRun run_perturb(const Problem& problem, const ExperimentConfig& config, double* seconds = nullptr);

/// Wall-clock seconds per phase; "mc" lists one entry per timing sample count.
nlohmann::json report_timings(const ExperimentConfig& config);

}  // namespace specuq
