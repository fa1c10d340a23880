#include "doctest.h"

#include "specuq/eig_core.hpp"
#include "specuq/mesh.hpp"

#include <cmath>
#include <numbers>

using namespace specuq;

namespace {

struct Pencil {
  SpMat A, M;
};

Pencil diffusion(int N) {
  const Mesh m = build_unit_square_mesh(N);
  const auto one = NodalField::constant(m, 1.0);
  return {assemble_stiffness(m, one), assemble_mass(m, one)};
}

}  // namespace

TEST_CASE("identity pencil") {
  SpMat I(5, 5);
  I.setIdentity();
  const auto r = solve_gevp(I, I, 3);
  CHECK((r.values - Vec::Ones(3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("diffusion spectrum and cluster") {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const auto p = diffusion(12);
  const auto r = solve_gevp(p.A, p.M, 6);
  CHECK(r.values[0] > 2 * pi2);
  CHECK(r.values[0] < 2 * pi2 * 1.02);
  CHECK(r.values[1] > 5 * pi2);
  // the criss-cross mesh keeps the 5 pi^2 pair exactly degenerate
  CHECK(std::abs(r.values[2] - r.values[1]) <= 1e-10 * r.values[1]);

  const Mat G = r.vectors.transpose() * (p.M * r.vectors);
  CHECK((G - Mat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
  for (Index i = 0; i < 6; ++i) {
    const Vec u = r.vectors.col(i);
    CHECK(u.dot(p.A * u) / u.dot(p.M * u) == doctest::Approx(r.values[i]).epsilon(1e-10));
    CHECK(r.residuals[i] <= 1e-9 * r.values[i]);
  }

  const auto c = make_cluster(r, 1);
  CHECK(c.m == 2);
  CHECK(c.indices == std::vector<Index>{1, 2});
  CHECK((c.basis.transpose() * (p.M * c.basis) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((c.basis.transpose() * (p.A * c.basis) - c.lambda0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <
        1e-8 * c.lambda0);
  CHECK(make_cluster(r, 0).m == 1);
  CHECK_THROWS_AS(make_cluster(solve_gevp(p.A, p.M, 3), 1), Error);
}

TEST_CASE("LOBPCG matches the dense solver") {
  const auto p = diffusion(14);
  const auto dense = solve_gevp(p.A, p.M, 4);
  // deterministic generic start; the preconditioner is the exact stiffness inverse
  Mat X0(p.A.rows(), 4);
  for (Index i = 0; i < X0.rows(); ++i)
    for (Index j = 0; j < 4; ++j) X0(i, j) = std::cos(0.37 * static_cast<double>(i * (j + 2)));
  LobpcgOptions opts;
  opts.tol = 1e-11;
  const auto it = solve_gevp_lobpcg(p.A, p.M, 4, X0, cholesky_preconditioner(p.A), opts);
  CHECK((it.values - dense.values).cwiseAbs().maxCoeff() <= 1e-9 * dense.values.maxCoeff());
  CHECK((it.vectors.transpose() * (p.M * it.vectors) - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  // the degenerate pair spans the same subspace in both solutions
  const Mat cross = dense.vectors.middleCols(1, 2).transpose() * (p.M * it.vectors.middleCols(1, 2));
  Eigen::JacobiSVD<Mat> svd(cross);
  CHECK(svd.singularValues().minCoeff() > 1 - 1e-9);
  MESSAGE("LOBPCG iterations: " << it.iterations);
}

TEST_CASE("indefinite mass is rejected") {
  SpMat I(3, 3);
  I.setIdentity();
  SpMat B = I;
  B.coeffRef(1, 1) = -1.0;
  try {
    solve_gevp(I, B, 1);
    FAIL("expected definiteness error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Definiteness);
  }
}

TEST_CASE("detect_cluster examples") {
  const Vec lam = (Vec(4) << 19.7, 49.3, 49.3, 78.9).finished();
  CHECK(detect_cluster(lam, 1, 1e-6) == std::vector<Index>{1, 2});
  CHECK(detect_cluster(lam, 2, 1e-6) == std::vector<Index>{1, 2});
  CHECK(detect_cluster(lam, 0, 1e-6) == std::vector<Index>{0});
  CHECK(detect_cluster(Vec::Constant(3, 2.0), 1, 1e-6).size() == 3);
  CHECK(detect_cluster(1e7 * lam, 1, 1e-6) == detect_cluster(lam, 1, 1e-6));
  CHECK(detect_cluster(1e-5 * lam, 0, 1e-6) == detect_cluster(lam, 0, 1e-6));
}

TEST_CASE("fix_signs") {
  Mat x(3, 2);
  x << 0, 1, -3, 2, 1, -2;
  const Mat f = fix_signs(x);
  CHECK(f.col(0) == Vec((Vec(3) << 0, 3, -1).finished()));
  // tie between 2 and -2: lowest index wins, already positive
  CHECK(f.col(1) == x.col(1));
  CHECK(fix_signs(f) == f);
}
