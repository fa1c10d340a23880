#include "specuq/uq_estimators.hpp"

#include "specuq/alignment.hpp"

#include <cmath>

namespace specuq {

namespace {

// Sums in fixed-size chunks so the rounding pattern depends only on sample order.
class ChunkedSum {
 public:
  explicit ChunkedSum(Index dim) : total_(Vec::Zero(dim)), chunk_(Vec::Zero(dim)) {}

  void add(const Vec& w, double weighted_sq) {
    chunk_ += w;
    chunk_sq_ += weighted_sq;
    if (++chunk_count_ == kChunk) flush();
    ++count_;
  }
  void flush() {
    total_ += chunk_;
    total_sq_ += chunk_sq_;
    chunk_.setZero();
    chunk_sq_ = 0.0;
    chunk_count_ = 0;
  }
  Vec mean() {
    flush();
    return total_ / static_cast<double>(count_);
  }
  // (1/K^2) sum_i ||w_i - mean||^2 from the running sums
  double rmse(double mean_weighted_sq) {
    flush();
    const double k = static_cast<double>(count_);
    return std::sqrt(std::max(0.0, total_sq_ - k * mean_weighted_sq) / (k * k));
  }
  Index count() const { return count_; }

 private:
  static constexpr Index kChunk = 256;
  Vec total_, chunk_;
  double total_sq_ = 0.0, chunk_sq_ = 0.0;
  Index chunk_count_ = 0, count_ = 0;
};

double block_weighted_sq(const SpMat& W, const Mat& X) {
  return (X.transpose() * (W * X)).trace();
}

}  // namespace

Realization negated(const Realization& r) { return {-r.z_mu, -r.z_eps}; }

std::optional<AlignedSample> aligned_sample(const Problem& problem, const Realization& r, double alpha, double beta,
                                            double min_singular, std::string* reason) {
  try {
    const SampleSolution s = problem.solve_sample(r, alpha, beta);
    const AlignmentResult a = align(s.basis, s.lambda, problem.cluster().basis, problem.M0(), min_singular);
    return AlignedSample{a.aligned_lambda, a.aligned_basis, a.singulars.minCoeff()};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Definiteness && e.kind() != ErrorKind::AlignmentRejected) throw;
    if (reason) *reason = e.what();
    return std::nullopt;
  }
}

double mc_rmse(const Mat& W, const SpMat* weight, Index m) {
  const Index count = W.cols();
  require(count >= 2, ErrorKind::Contract, "RMSE needs at least two samples");
  const Vec mean = W.rowwise().mean();
  const Mat D = W.colwise() - mean;
  double s = 0.0;
  if (weight) {
    const Mat WD = apply_block_weight(*weight, m, D);
    s = D.cwiseProduct(WD).sum();
  } else {
    s = D.squaredNorm();
  }
  return std::sqrt(std::max(0.0, s)) / static_cast<double>(count);
}

Mat covariance_about(const Mat& X, const Vec& center, bool own_mean) {
  const Index count = X.cols();
  require(count >= 2, ErrorKind::Contract, "covariance needs at least two samples");
  const Mat D = X.colwise() - center;
  return D * D.transpose() / static_cast<double>(own_mean ? count - 1 : count);
}

double covariance_rmse(const Mat& X, const Vec& center, const Mat& C) {
  const Index count = X.cols();
  double s = 0.0;
  for (Index i = 0; i < count; ++i) {
    const Vec d = X.col(i) - center;
    s += (C - d * d.transpose()).squaredNorm();
  }
  return std::sqrt(s) / static_cast<double>(count);
}

MomentEstimate mc_estimate(const Problem& problem, const MCConfig& config) {
  require(config.samples >= 2, ErrorKind::Configuration, "Monte Carlo needs at least two samples");
  require(!config.antithetic || config.samples % 2 == 0, ErrorKind::Configuration,
          "antithetic sampling needs an even sample count");
  const Index n = problem.n();
  const Index m = problem.m();
  const Mat& u0 = problem.cluster().basis;
  const SpMat& M0 = problem.M0();

  MomentEstimate est;
  Index attempted = 0;
  auto draw = [&](const Realization& r) {
    ++attempted;
    std::string reason;
    auto s = aligned_sample(problem, r, config.alpha, config.beta, config.min_singular, &reason);
    if (s) {
      est.min_singular.push_back(s->min_singular);
    } else {
      ++est.rejected;
      est.rejection_log.push_back(reason);
    }
    return s;
  };

  // mean: standard draws or antithetic pair averages, shifted by the reference
  ChunkedSum basis_sum(n * m);
  Mat lambda_units(m * m, 0);
  std::vector<Vec> lambda_cols;
  std::vector<Mat> cov_lambda_cols;
  std::vector<Vec> cov_basis_cols;
  const Index units = config.antithetic ? config.samples / 2 : config.samples;
  for (Index i = 0; i < units; ++i) {
    const Realization r = problem.realization(config.first_index + static_cast<std::uint64_t>(i));
    Mat lam, basis;
    if (config.antithetic) {
      auto a = draw(r);
      auto b = draw(negated(r));
      if (!a || !b) continue;
      lam = 0.5 * (a->lambda + b->lambda);
      basis = 0.5 * (a->basis + b->basis);
    } else {
      auto a = draw(r);
      if (!a) continue;
      lam = a->lambda;
      basis = a->basis;
      cov_lambda_cols.push_back(vec(a->lambda));
      if (config.basis_covariance) cov_basis_cols.push_back(vec(a->basis));
    }
    lambda_cols.push_back(vec(lam));
    const Mat shifted = basis - u0;
    basis_sum.add(vec(shifted), block_weighted_sq(M0, shifted));
  }
  if (config.antithetic) {
    const std::uint64_t offset = config.first_index + static_cast<std::uint64_t>(units);
    for (Index i = 0; i < config.samples; ++i) {
      auto a = draw(problem.realization(offset + static_cast<std::uint64_t>(i)));
      if (!a) continue;
      cov_lambda_cols.push_back(vec(a->lambda));
      if (config.basis_covariance) cov_basis_cols.push_back(vec(a->basis));
    }
  }
  if (static_cast<double>(est.rejected) > config.max_reject_fraction * static_cast<double>(attempted)) {
    throw Error(ErrorKind::AmplitudeTooLarge,
                std::to_string(est.rejected) + " of " + std::to_string(attempted) +
                    " samples rejected; reduce alpha/beta");
  }
  require(lambda_cols.size() >= 2 && cov_lambda_cols.size() >= 2, ErrorKind::AmplitudeTooLarge,
          "too few accepted samples");

  Mat L(m * m, static_cast<Index>(lambda_cols.size()));
  for (std::size_t i = 0; i < lambda_cols.size(); ++i) L.col(static_cast<Index>(i)) = lambda_cols[i];
  const Vec mean_l = L.rowwise().mean();
  est.mean_lambda = Eigen::Map<const Mat>(mean_l.data(), m, m);
  est.rmse_mean_lambda = mc_rmse(L);
  const Vec shift_mean = basis_sum.mean();
  const Mat shift_mean_mat = Eigen::Map<const Mat>(shift_mean.data(), n, m);
  est.mean_basis = u0 + shift_mean_mat;
  est.rmse_mean_basis = basis_sum.rmse(block_weighted_sq(M0, shift_mean_mat));
  est.samples = config.antithetic ? 2 * static_cast<Index>(lambda_cols.size()) : static_cast<Index>(lambda_cols.size());

  Mat X(m * m, static_cast<Index>(cov_lambda_cols.size()));
  for (std::size_t i = 0; i < cov_lambda_cols.size(); ++i) X.col(static_cast<Index>(i)) = cov_lambda_cols[i];
  est.cov_lambda = covariance_about(X, mean_l, !config.antithetic);
  est.psd_clip = project_psd(est.cov_lambda);
  est.rmse_cov_lambda = covariance_rmse(X, mean_l, est.cov_lambda);

  if (config.basis_covariance) {
    const Vec center = vec(est.mean_basis);
    Mat D(n * m, static_cast<Index>(cov_basis_cols.size()));
    for (std::size_t i = 0; i < cov_basis_cols.size(); ++i) D.col(static_cast<Index>(i)) = cov_basis_cols[i] - center;
    const double denom = static_cast<double>(config.antithetic ? D.cols() : D.cols() - 1);
    est.cov_basis = low_rank_from_samples(D, 1.0 / denom);
    est.has_cov_basis = true;
  }
  return est;
}

}  // namespace specuq
