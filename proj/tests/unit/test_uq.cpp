#include "doctest.h"

#include "specuq/uq_estimators.hpp"
#include "specuq/uq_perturb.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

using namespace specuq;

namespace {

const Problem& problem_n(int N, Index truncate = -1) {
  static std::map<std::pair<int, Index>, std::unique_ptr<Problem>> cache;
  auto& slot = cache[{N, truncate}];
  if (!slot) {
    ProblemConfig c;
    c.N = N;
    c.kl_truncate = truncate;
    slot = std::make_unique<Problem>(c);
  }
  return *slot;
}

}  // namespace

TEST_CASE("mc_rmse small examples") {
  Mat w(1, 2);
  w << 0.0, 2.0;
  CHECK(mc_rmse(w) == doctest::Approx(std::sqrt(0.5)));
  CHECK(mc_rmse(Mat::Constant(3, 7, 1.5)) == 0.0);

  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  Mat g(1, 10000);
  for (Index i = 0; i < g.cols(); ++i) g(0, i) = nd(gen);
  CHECK(mc_rmse(g) == doctest::Approx(0.01).epsilon(0.05));
  CHECK_THROWS_AS(mc_rmse(Mat::Zero(1, 1)), Error);
}

TEST_CASE("covariance helpers") {
  Mat X(2, 4);
  X << 1, -1, 1, -1, 2, -2, -2, 2;
  const Mat C = covariance_about(X, Vec::Zero(2), false);
  CHECK(C(0, 0) == doctest::Approx(1.0));
  CHECK(C(1, 1) == doctest::Approx(4.0));
  CHECK(std::abs(C(0, 1)) < 1e-15);
  CHECK(covariance_about(X, Vec::Zero(2), true)(0, 0) == doctest::Approx(4.0 / 3.0));

  const auto lr = low_rank_from_samples(X, 0.25);
  CHECK((lr.dense() - C).cwiseAbs().maxCoeff() < 1e-13);
  Mat wide = Mat::Random(3, 10);
  const auto lw = low_rank_from_samples(wide, 0.5);
  CHECK((lw.dense() - 0.5 * wide * wide.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  Mat neg(2, 2);
  neg << 1.0, 0.0, 0.0, -0.25;
  CHECK(project_psd(neg) == doctest::Approx(0.25));
  CHECK(neg(1, 1) == doctest::Approx(0.0));

  SpMat W(3, 3);
  W.setIdentity();
  W *= 2.0;
  const Mat F = Mat::Random(6, 2);
  const LowRankCovariance a{F, 1.0};
  const LowRankCovariance b{F.leftCols(1), 1.0};
  const Mat diff = a.dense() - b.dense();
  CHECK(weighted_difference_norm(a, b, W, 2) == doctest::Approx(2.0 * diff.norm()));
  CHECK(weighted_difference_norm(a, a, W, 2) < 1e-12);
}

TEST_CASE("zero amplitude gives the reference and no spread") {
  const Problem& p = problem_n(9);
  MCConfig c;
  c.samples = 6;
  c.alpha = 0.0;
  c.beta = 0.0;
  const auto est = mc_estimate(p, c);
  CHECK((est.mean_lambda - p.cluster().lambda0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <
        1e-8 * p.cluster().lambda0);
  CHECK(est.cov_lambda.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(est.rmse_mean_lambda < 1e-9);
  CHECK(est.rejected == 0);
}

TEST_CASE("Monte Carlo is reproducible and antithetic pairs cancel the linear term") {
  const Problem& p = problem_n(9);
  MCConfig c;
  c.samples = 8;
  c.alpha = 1e-3;
  c.beta = 1e-3;
  const auto a = mc_estimate(p, c);
  const auto b = mc_estimate(p, c);
  CHECK((a.mean_lambda - b.mean_lambda).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.mean_basis - b.mean_basis).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.cov_lambda - b.cov_lambda).cwiseAbs().maxCoeff() == 0.0);

  c.antithetic = true;
  const auto anti = mc_estimate(p, c);
  const Mat l0 = p.cluster().lambda0 * Mat::Identity(2, 2);
  const double std_err = (a.mean_lambda - l0).norm();
  const double anti_err = (anti.mean_lambda - l0).norm();
  CHECK(anti_err < 0.05 * std_err);
  CHECK(anti.samples == 8);
  CHECK_THROWS_AS([&] {
    MCConfig odd = c;
    odd.samples = 7;
    mc_estimate(p, odd);
  }(), Error);
}

TEST_CASE("direct eigenvalue covariance matches the saddle factor") {
  const Problem& p = problem_n(9);
  const auto mom = perturb_moments(p);
  const Index nm = p.n() * p.m();
  CHECK(mom.cov_joint_mu.dim() == nm + 4);
  CHECK(mom.cov_joint_mu.rank() == p.kl_rank());
  const double s = mom.direct.mu.cwiseAbs().maxCoeff();
  CHECK((mom.cov_lambda_mu() - mom.direct.mu).cwiseAbs().maxCoeff() <= 1e-9 * s);
  const double se = mom.direct.eps.cwiseAbs().maxCoeff();
  CHECK((mom.cov_lambda_eps() - mom.direct.eps).cwiseAbs().maxCoeff() <= 1e-9 * se);

  const auto pred = perturb_cov(0.5, 0.25, mom);
  const Mat expect = 0.25 * mom.direct.mu + 0.0625 * mom.direct.eps;
  CHECK((pred.cov_lambda - expect).cwiseAbs().maxCoeff() <= 1e-9 * expect.cwiseAbs().maxCoeff());
  CHECK(pred.cov_basis.dim() == nm);
  CHECK(perturb_cov(0.0, 0.0, mom).cov_lambda.cwiseAbs().maxCoeff() == 0.0);

  const auto mean = perturb_mean(p.cluster());
  CHECK((mean.mean_basis - p.cluster().basis).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("covariance equations agree with a dense Kronecker solve") {
  const Problem& p = problem_n(5, 3);
  REQUIRE(p.kl_rank() == 3);
  REQUIRE(p.m() == 2);
  const Index n = p.n();
  const Index m = p.m();
  const Index s = n + m;
  const Mat& u0 = p.cluster().basis;
  const double l0 = p.cluster().lambda0;
  const Mat A0 = Mat(p.A0());
  const Mat M0 = Mat(p.M0());

  Mat K = Mat::Zero(s, s);
  K.topLeftCorner(n, n) = A0 - l0 * M0;
  K.topRightCorner(n, m) = -M0 * u0;
  K.bottomLeftCorner(m, n) = u0.transpose() * M0;
  const Mat KK = Eigen::kroneckerProduct(K, K);
  const Eigen::PartialPivLU<Mat> lu(KK);

  const auto mom = perturb_moments(p);
  for (int dir = 0; dir < 2; ++dir) {
    // per-mode right-hand sides, built directly
    std::vector<Mat> rhs;
    for (Index k = 0; k < 3; ++k) {
      Mat b = Mat::Zero(s, m);
      if (dir == 0) {
        b.topRows(n) = -(Mat(p.mode_stiffness(k)) * u0);
      } else {
        const Mat Mk = Mat(p.mode_mass(k));
        b.topRows(n) = l0 * Mk * u0;
        b.bottomRows(m) = -0.5 * u0.transpose() * Mk * u0;
      }
      rhs.push_back(b);
    }
    const Mat joint = (dir == 0 ? mom.cov_joint_mu : mom.cov_joint_eps).dense();
    auto slot = [&](Index col, Index row) { return row < n ? col * n + row : n * m + col * m + (row - n); };
    double err = 0.0, ref = 0.0;
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < m; ++j) {
        Mat cb = Mat::Zero(s, s);
        for (const Mat& b : rhs) cb += b.col(i) * b.col(j).transpose() / 12.0;
        const Vec x = lu.solve(Eigen::Map<const Vec>(cb.data(), s * s));
        const Eigen::Map<const Mat> X(x.data(), s, s);
        for (Index a = 0; a < s; ++a) {
          for (Index c = 0; c < s; ++c) {
            err = std::max(err, std::abs(X(a, c) - joint(slot(i, a), slot(j, c))));
            ref = std::max(ref, std::abs(X(a, c)));
          }
        }
      }
    }
    CHECK(err <= 1e-8 * ref);
  }
}
