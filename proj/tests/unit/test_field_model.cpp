#include "doctest.h"

#include "specuq/field_model.hpp"

#include <cmath>

using namespace specuq;

TEST_CASE("pivoted Cholesky on a diagonal matrix") {
  const Vec d = (Vec(3) << 3, 2, 1).finished();
  const auto r = pivoted_cholesky(3, [&](Index i, Index j) { return i == j ? d[i] : 0.0; }, 0.0, -1);
  CHECK(r.rank() == 3);
  CHECK(r.pivots == std::vector<Index>{0, 1, 2});
  CHECK((r.factor * r.factor.transpose() - Mat(d.asDiagonal())).norm() < 1e-15);
  CHECK(r.trace_error == 0.0);
}

TEST_CASE("pivoted Cholesky on a rank-one matrix") {
  const Vec v = (Vec(4) << 1, -2, 3, 0.5).finished();
  const auto r = pivoted_cholesky(4, [&](Index i, Index j) { return v[i] * v[j]; }, 0.0, -1);
  CHECK(r.rank() == 1);
  CHECK(r.pivots.front() == 2);
  CHECK((r.factor * r.factor.transpose() - v * v.transpose()).norm() < 1e-15);
}

TEST_CASE("pivoted Cholesky errors") {
  // [[1,2],[2,1]] is indefinite: the second updated diagonal is 1 - 4 = -3
  CHECK_THROWS_AS(pivoted_cholesky(2, [](Index i, Index j) { return i == j ? 1.0 : 2.0; }, 1e-8, -1), Error);
  try {
    pivoted_cholesky(3, [](Index i, Index j) { return i == j ? 1.0 : 0.0; }, 0.5, 2);
    FAIL("expected rank exhaustion");
  } catch (const RankExhaustedError& e) {
    CHECK(e.kind() == ErrorKind::RankExhausted);
    CHECK(e.achieved_error() == doctest::Approx(1.0));
  }
}

TEST_CASE("pivoted Cholesky residual against a dense kernel matrix") {
  const Mesh mesh = build_unit_square_mesh(9);  // 145 nodes
  const auto kernel = KernelSpec::gaussian();
  const auto entry = nodal_kernel_entry(mesh, kernel);
  const Index n = mesh.num_nodes();
  Mat C(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) C(i, j) = entry(i, j);
  const auto r = pivoted_cholesky(n, entry, 1e-5, -1);
  const double dense_trace = (C - r.factor * r.factor.transpose()).trace();
  CHECK(dense_trace <= 1e-5);
  CHECK(dense_trace == doctest::Approx(r.trace_error).epsilon(1e-6).scale(1e-12));
  for (std::size_t i = 1; i < r.trace_history.size(); ++i) CHECK(r.trace_history[i] <= r.trace_history[i - 1]);
  MESSAGE("kernel rank at N=9: " << r.rank());
}

TEST_CASE("KL expansion properties") {
  const Mesh mesh = build_unit_square_mesh(9);
  const SpMat M = assemble_mass(mesh, NodalField::constant(mesh, 1.0), DofSet::All);
  const double tol = 1e-5;
  const auto kl = build_kl(mesh, KernelSpec::gaussian(), M, tol);
  REQUIRE(kl.rank() > 0);
  for (Index i = 1; i < kl.rank(); ++i) CHECK(kl.sigmas[i] <= kl.sigmas[i - 1]);
  CHECK(kl.sigmas.minCoeff() > 0.0);

  // phi_i = modes_i / sqrt(sigma_i) is M-orthonormal
  Mat phi = kl.modes;
  for (Index i = 0; i < kl.rank(); ++i) phi.col(i) /= std::sqrt(kl.sigmas[i]);
  const Mat gram = phi.transpose() * (M * phi);
  CHECK((gram - Mat::Identity(kl.rank(), kl.rank())).cwiseAbs().maxCoeff() <= 10 * tol);

  // sum of sigmas vs the dense trace of the Galerkin operator, trace(M G)
  const auto entry = nodal_kernel_entry(mesh, KernelSpec::gaussian());
  Mat G(mesh.num_nodes(), mesh.num_nodes());
  for (Index i = 0; i < G.rows(); ++i)
    for (Index j = 0; j < G.cols(); ++j) G(i, j) = entry(i, j);
  const double op_trace = (Mat(M) * G).trace();
  CHECK(std::abs(op_trace - kl.sigmas.sum()) <= tol);
}

TEST_CASE("KL with a one-point kernel") {
  const Mesh mesh = build_unit_square_mesh(4);
  const SpMat M = assemble_mass(mesh, NodalField::constant(mesh, 1.0), DofSet::All);
  const Index node = 5;
  const auto kl = build_kl_from_gram(mesh.num_nodes(), [&](Index i, Index j) { return i == node && j == node ? 1.0 : 0.0; },
                                     M, 1e-12);
  CHECK(kl.rank() == 1);
  for (Index i = 0; i < mesh.num_nodes(); ++i) CHECK((kl.modes(i, 0) != 0.0) == (i == node));
}

TEST_CASE("singular mass is a configuration error") {
  SpMat M(2, 2);
  M.insert(0, 0) = 1.0;
  M.makeCompressed();
  try {
    build_kl_from_gram(2, [](Index i, Index j) { return i == j ? 1.0 : 0.0; }, M, 1e-12);
    FAIL("expected configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Configuration);
  }
}

TEST_CASE("random streams") {
  RandomStream a(42, 7, 1), b(42, 7, 1), c(42, 8, 1), d(42, 7, 2);
  const Vec za = a.uniform_centered(1000);
  CHECK(za == b.uniform_centered(1000));
  CHECK(za != c.uniform_centered(1000));
  CHECK(za != d.uniform_centered(1000));
  CHECK(za.minCoeff() >= -0.5);
  CHECK(za.maxCoeff() < 0.5);
}

TEST_CASE("field sampling") {
  const Mesh mesh = build_unit_square_mesh(7);
  const SpMat M = assemble_mass(mesh, NodalField::constant(mesh, 1.0), DofSet::All);
  auto kl = build_kl(mesh, KernelSpec::gaussian(), M, 1e-5);
  kl.mean = 1.0;
  kl.amplitude = 0.4;

  RandomStream s0(1, 0, 0);
  const FieldSample fs = sample_field(kl, s0);
  const Vec anti = 0.5 * (fs.field.values + kl.field(-fs.z).values);
  CHECK((anti.array() - kl.mean).abs().maxCoeff() == 0.0);

  KLExpansion flat = kl;
  flat.amplitude = 0.0;
  CHECK((flat.field(fs.z).values.array() - 1.0).abs().maxCoeff() == 0.0);

  // variance and covariance at two nodes against (amp^2/12) sum_i L_i(x) L_i(y)
  const Index x = 12, y = 40;
  const double var_ref = kl.amplitude * kl.amplitude * kUniformVariance * kl.modes.row(x).squaredNorm();
  const double cov_ref = kl.amplitude * kl.amplitude * kUniformVariance * kl.modes.row(x).dot(kl.modes.row(y));
  const int draws = 100000;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, sup = 0;
  for (int k = 0; k < draws; ++k) {
    RandomStream st(99, static_cast<std::uint64_t>(k), 0);
    const FieldSample f = sample_field(kl, st);
    const double fx = f.field.values[x], fy = f.field.values[y];
    sx += fx;
    sy += fy;
    sxx += fx * fx;
    sxy += fx * fy;
    sup = std::max(sup, kl.fluctuation(f.z).values.cwiseAbs().maxCoeff());
  }
  const double mx = sx / draws, my = sy / draws;
  CHECK((sxx / draws - mx * mx) == doctest::Approx(var_ref).epsilon(0.05));
  CHECK((sxy / draws - mx * my) == doctest::Approx(cov_ref).epsilon(0.05));
  CHECK(sup <= kl.sup_bound());
}

TEST_CASE("KL JSON round trip") {
  const Mesh mesh = build_unit_square_mesh(5);
  const SpMat M = assemble_mass(mesh, NodalField::constant(mesh, 1.0), DofSet::All);
  auto kl = build_kl(mesh, KernelSpec::gaussian(), M, 1e-5);
  kl.amplitude = 0.25;
  kl.seed_policy_stream = 1;
  const auto back = kl_from_json(kl_to_json(kl, 123));
  CHECK(back.modes == kl.modes);
  CHECK(back.sigmas == kl.sigmas);
  CHECK(back.amplitude == 0.25);
  CHECK(back.seed_policy_stream == 1);
  CHECK_THROWS_AS(kl_from_json("{\"n_nodes\":2}"), Error);
}
