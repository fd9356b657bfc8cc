#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualgs/uncertainty.hpp"
#include "dualgs/validate.hpp"
#include "oracles.hpp"

using namespace dualgs;
using uncertainty::DeltaBound;
using Eigen::MatrixXd;

namespace {

estimate::InfoMatrix info_of(const MatrixXd& d) {
  estimate::InfoMatrix info;
  info.D = matkit::SymMatrix(d);
  info.sigma_w = 1.0;
  info.c_delta = 1.0;
  return info;
}

}  // namespace

TEST_CASE("delta_u_bound: identity, diagonal, and inverse-product oracle") {
  CHECK((uncertainty::delta_u_bound(info_of(MatrixXd::Identity(3, 3)), 2)
             .P.mat() -
         MatrixXd::Identity(3, 3))
            .norm() < 1e-14);

  MatrixXd diag(2, 2);
  diag << 4, 0, 0, 1;
  MatrixXd expected(2, 2);
  expected << 0.25, 0, 0, 1;
  CHECK((uncertainty::delta_u_bound(info_of(diag), 1).P.mat() - expected)
            .norm() < 1e-14);

  RngStream rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd d = oracles::random_pd(3, rng);
    const DeltaBound b = uncertainty::delta_u_bound(info_of(d), 2);
    CHECK((b.P.mat() * d - MatrixXd::Identity(3, 3)).norm() < 1e-10);
  }
}

TEST_CASE("delta_u_bound: singular info is rejected") {
  CHECK_THROWS_AS(uncertainty::delta_u_bound(info_of(MatrixXd::Zero(2, 2)), 1),
                  SingularInfo);
}

TEST_CASE("delta_s_bound: eps = 1 with unit matrices gives 4I") {
  const DeltaBound b = uncertainty::delta_s_bound(
      1.0, info_of(MatrixXd::Identity(3, 3)), info_of(MatrixXd::Identity(3, 3)),
      2);
  CHECK((b.P.mat() - 4.0 * MatrixXd::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("delta_s_bound: closed form at eps = 1e6") {
  RngStream rng(17);
  const MatrixXd d0 = oracles::random_pd(3, rng);
  const MatrixXd dt = oracles::random_pd(3, rng);
  const double eps = 1e6;
  const DeltaBound b =
      uncertainty::delta_s_bound(eps, info_of(d0), info_of(dt), 2);
  const MatrixXd expected =
      (1.0 + 1.0 / eps) * d0.inverse() + (1.0 + eps) * dt.inverse();
  CHECK((b.P.mat() - expected).norm() < 1e-9 * expected.norm());
}

TEST_CASE("delta_s_bound: eps <= 0 is rejected") {
  CHECK_THROWS_AS(uncertainty::delta_s_bound(0.0,
                                             info_of(MatrixXd::Identity(2, 2)),
                                             info_of(MatrixXd::Identity(2, 2)),
                                             1),
                  DomainError);
}

TEST_CASE("Young containment: composite Delta_s stays inside for every eps") {
  RngStream rng(2718);
  const int nx = 2, p = 3;
  for (int instance = 0; instance < 5; ++instance) {
    const MatrixXd d0 = oracles::random_pd(p, rng, 0.5);
    const MatrixXd dt = oracles::random_pd(p, rng, 0.5);
    const DeltaBound b0 = uncertainty::delta_u_bound(info_of(d0), nx);
    const DeltaBound bu = uncertainty::delta_u_bound(info_of(dt), nx);
    for (double eps : {0.1, 1.0, 10.0}) {
      const DeltaBound bs =
          uncertainty::delta_s_bound(eps, info_of(d0), info_of(dt), nx);
      for (int draw = 0; draw < 200; ++draw) {
        const MatrixXd delta0 = uncertainty::sample_delta(b0, rng, 0.3);
        const MatrixXd delta_u = uncertainty::sample_delta(bu, rng, 0.3);
        const MatrixXd delta_s = -(delta0 + delta_u);
        CHECK(validate::in_delta_set(delta_s, bs));
      }
    }
  }
}

TEST_CASE("ds_feasibility_block: hand arithmetic, both verdicts") {
  const MatrixXd one = MatrixXd::Identity(1, 1);
  const matkit::SymMatrix feasible = uncertainty::ds_feasibility_block(
      1.0, matkit::SymMatrix(one), matkit::SymMatrix(one),
      matkit::SymMatrix(MatrixXd::Constant(1, 1, 0.2)));
  MatrixXd expected(2, 2);
  expected << 0.6, 1.0, 1.0, 2.0;
  CHECK((feasible.mat() - expected).norm() < 1e-14);
  CHECK(matkit::is_definite(feasible, matkit::Definite::Pos, 0.0));
  // Direct bound: 1/0.2 = 5 > (1+1/1) + (1+1) = 4.

  const matkit::SymMatrix infeasible = uncertainty::ds_feasibility_block(
      1.0, matkit::SymMatrix(one), matkit::SymMatrix(one),
      matkit::SymMatrix(one));
  MatrixXd expected2(2, 2);
  expected2 << -1.0, 1.0, 1.0, 2.0;
  CHECK((infeasible.mat() - expected2).norm() < 1e-14);
  CHECK_FALSE(matkit::is_definite(infeasible, matkit::Definite::Pos, 0.0));
  // Direct bound: 1 > 4 is false.
}

TEST_CASE("ds_feasibility_block: equivalence with the direct inverse bound") {
  RngStream rng(424242);
  int agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double eps = std::exp(2.0 * rng.gaussian() * 0.5);
    const MatrixXd d0 = oracles::random_pd(2, rng, 0.2);
    const MatrixXd dbar = oracles::random_pd(2, rng, 0.2);
    const MatrixXd ds = oracles::random_pd(2, rng, 0.05);
    const matkit::SymMatrix block = uncertainty::ds_feasibility_block(
        eps, matkit::SymMatrix(d0), matkit::SymMatrix(dbar),
        matkit::SymMatrix(ds));
    const bool via_block = matkit::is_definite(block, matkit::Definite::Pos, 0.0);
    const MatrixXd direct = ds.inverse() -
                            (1.0 + 1.0 / eps) * d0.inverse() -
                            (1.0 + eps) * dbar.inverse();
    const bool via_inverse =
        matkit::is_definite(matkit::SymMatrix(direct), matkit::Definite::Pos,
                            0.0);
    agree += via_block == via_inverse;
  }
  CHECK(agree == 1000);
}

TEST_CASE("sample_delta: boundary square case gives an orthogonal matrix") {
  DeltaBound b;
  b.P = matkit::SymMatrix::identity(3);
  b.rows = 3;
  RngStream rng(7);
  const MatrixXd delta = uncertainty::sample_delta(b, rng, 1.0);
  CHECK((delta * delta.transpose() - MatrixXd::Identity(3, 3)).norm() < 1e-9);
  CHECK((delta.transpose() * delta - MatrixXd::Identity(3, 3)).norm() < 1e-9);
}

TEST_CASE("sample_delta: eigenvalue oracle on the normalized Gram matrix") {
  RngStream rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    DeltaBound b;
    b.P = matkit::SymMatrix(oracles::random_pd(3, rng, 0.2));
    b.rows = 2;
    const MatrixXd delta = uncertainty::sample_delta(b, rng, 0.25);
    const MatrixXd p_invsqrt =
        matkit::sqrt_psd(b.P).inverse();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(
        p_invsqrt * delta.transpose() * delta * p_invsqrt);
    CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-9);
  }
}

TEST_CASE("sample_delta: the zero block always belongs to the set") {
  RngStream rng(9);
  DeltaBound b;
  b.P = matkit::SymMatrix(oracles::random_pd(3, rng, 0.2));
  b.rows = 2;
  CHECK(validate::in_delta_set(MatrixXd::Zero(2, 3), b));
}

TEST_CASE("delta_s_bound: monotone in both inverse information matrices") {
  RngStream rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd d0 = oracles::random_pd(3, rng, 0.3);
    const MatrixXd dt = oracles::random_pd(3, rng, 0.3);
    const MatrixXd bigger0 = d0 + oracles::random_psd(3, rng);
    const MatrixXd biggerT = dt + oracles::random_psd(3, rng);
    // Larger information => smaller inverse => smaller bound in the PSD order.
    const MatrixXd p = uncertainty::delta_s_bound(0.7, info_of(d0),
                                                  info_of(dt), 2)
                           .P.mat();
    const MatrixXd p_small = uncertainty::delta_s_bound(0.7, info_of(bigger0),
                                                        info_of(biggerT), 2)
                                 .P.mat();
    CHECK(matkit::is_definite(matkit::SymMatrix(p - p_small),
                              matkit::Definite::Psd, 1e-10));
  }
}
