#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualgs/synthesis.hpp"
#include "dualgs/validate.hpp"
#include "oracles.hpp"

using namespace dualgs;
using synthesis::DualDesign;
using synthesis::Hyperparams;
using synthesis::HyperGrids;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

estimate::InfoMatrix info_of(const MatrixXd& d, double sigma_w = 0.1,
                             double c_delta = 10.0) {
  estimate::InfoMatrix info;
  info.D = matkit::SymMatrix(d);
  info.sigma_w = sigma_w;
  info.c_delta = c_delta;
  return info;
}

lmi::ExplorationData scalar_ed(double a, double b, const MatrixXd& d0,
                               double q = 1.0, double r = 1.0,
                               double sigma_w = 0.1) {
  lmi::ExplorationData ed;
  ed.A0 = MatrixXd::Constant(1, 1, a);
  ed.B0 = MatrixXd::Constant(1, 1, b);
  ed.D0 = info_of(d0, sigma_w);
  ed.Q = MatrixXd::Constant(1, 1, q);
  ed.R = MatrixXd::Constant(1, 1, r);
  return ed;
}

plant::LtiSystem desk_system() {
  plant::LtiSystem sys;
  sys.A = MatrixXd(2, 2);
  sys.A << 0.9, 0.2, 0.0, 0.7;
  sys.B = MatrixXd(2, 1);
  sys.B << 0, 1;
  sys.sigma_w = 0.1;
  return sys;
}

synthesis::PipelineConfig desk_config(std::uint64_t seed = 12345) {
  synthesis::PipelineConfig cfg;
  cfg.delta = 0.1;
  cfg.n0 = 200;
  cfg.T_explore = 1000;
  cfg.initial_input_std = 1.0;
  cfg.perf = plant::PerfChannel::l2_gain(20.0, 2, 1);
  cfg.Q = MatrixXd::Identity(2, 2);
  cfg.R = MatrixXd::Identity(1, 1);
  // Compact grids around the known-good region keep the unit suite fast.
  cfg.grids.eps = {0.5, 1.0};
  cfg.grids.t_e = {0.001, 0.003};
  cfg.grids.lambda_s = {10.0, 100.0};
  cfg.grids.lambda_u = {1.0, 10.0};
  cfg.k0_te_grid = {0.001, 0.003, 0.01, 0.03};
  cfg.seed = seed;
  cfg.jobs = 2;
  return cfg;
}

const synthesis::RunReport& desk_report() {
  static synthesis::RunReport report =
      synthesis::run_algorithm1(desk_config(), desk_system());
  return report;
}

}  // namespace

TEST_CASE("robust_lqr_K0: zero-uncertainty scalar gain matches the DARE oracle") {
  const MatrixXd d0 = 1e6 * MatrixXd::Identity(2, 2);
  const lmi::ExplorationData ed = scalar_ed(0.9, 1.0, d0);
  const synthesis::RobustLqrResult res =
      synthesis::robust_lqr_K0_search(ed, {0.001, 0.01, 0.03});

  const oracles::DareSolution dare = oracles::riccati_iteration(
      ed.A0, ed.B0, ed.Q, ed.R);
  // Oracle value: K = -(R + B'PB)^-1 B'PA = -0.537658 for these weights.
  CHECK(dare.K(0, 0) == doctest::Approx(-0.5376583).epsilon(1e-5));
  CHECK(res.K0(0, 0) == doctest::Approx(dare.K(0, 0)).epsilon(1e-3));
}

TEST_CASE("robust_lqr_K0: zero-uncertainty 2-state gain matches the DARE oracle") {
  const plant::LtiSystem sys = desk_system();
  lmi::ExplorationData ed;
  ed.A0 = sys.A;
  ed.B0 = sys.B;
  ed.D0 = info_of(1e6 * MatrixXd::Identity(3, 3));
  ed.Q = MatrixXd::Identity(2, 2);
  ed.R = MatrixXd::Identity(1, 1);
  const synthesis::RobustLqrResult res =
      synthesis::robust_lqr_K0_search(ed, {0.001, 0.01, 0.03});
  const oracles::DareSolution dare =
      oracles::riccati_iteration(sys.A, sys.B, ed.Q, ed.R);
  CHECK((res.K0 - dare.K).norm() <= 1e-3 * (1.0 + dare.K.norm()));
}

TEST_CASE("robust_lqr_K0: unstable plant with huge uncertainty is infeasible") {
  const MatrixXd d0 = 1e-4 * MatrixXd::Identity(2, 2);
  const lmi::ExplorationData ed = scalar_ed(1.3, 1.0, d0);
  CHECK_THROWS_AS(synthesis::robust_lqr_K0_search(ed, {0.001, 0.01}),
                  AllInfeasible);
}

TEST_CASE("robust_lqr_K0: no state cost means no control for a stable plant") {
  const MatrixXd d0 = 1e6 * MatrixXd::Identity(2, 2);
  const lmi::ExplorationData ed = scalar_ed(0.6, 1.0, d0, /*q=*/0.0);
  const synthesis::RobustLqrResult res =
      synthesis::robust_lqr_K0_search(ed, {0.001, 0.01});
  CHECK(std::fabs(res.K0(0, 0)) < 1e-3);
}

TEST_CASE("build_dual_sdp: nine variables of the documented shapes") {
  const synthesis::RunReport& rep = desk_report();
  lmi::GainSchedulingData gs;
  gs.A0 = rep.est0.A_hat;
  gs.B0 = rep.est0.B_hat;
  gs.perf = desk_config().perf;
  gs.dims = {2, 1, 2};
  lmi::ExplorationData ed;
  ed.A0 = rep.est0.A_hat;
  ed.B0 = rep.est0.B_hat;
  ed.D0 = rep.D0;
  ed.Q = MatrixXd::Identity(2, 2);
  ed.R = MatrixXd::Identity(1, 1);
  const sdp::ConicProgram p = synthesis::build_dual_sdp(
      gs, ed, 1000.0, rep.k0.K0, rep.design.hyper);
  REQUIRE(p.variables().size() == 9);
  const std::map<std::string, std::pair<int, int>> expected = {
      {"W_e", {2, 2}}, {"Z_e", {2, 1}}, {"Y_e", {3, 3}},
      {"Sigma", {1, 1}}, {"Ks", {1, 2}}, {"M", {1, 2}},
      {"N", {2, 2}}, {"DbarT", {3, 3}}, {"Ds", {3, 3}}};
  for (const auto& v : p.variables()) {
    REQUIRE(expected.count(v.name) == 1);
    CHECK(v.rows == expected.at(v.name).first);
    CHECK(v.cols == expected.at(v.name).second);
  }
  CHECK(p.constraints().size() == 5);
}

TEST_CASE("dropping the gain-scheduling constraint can only lower the cost") {
  const synthesis::RunReport& rep = desk_report();
  lmi::ExplorationData ed;
  ed.A0 = rep.est0.A_hat;
  ed.B0 = rep.est0.B_hat;
  ed.D0 = rep.D0;
  ed.Q = MatrixXd::Identity(2, 2);
  ed.R = MatrixXd::Identity(1, 1);

  // Relaxation: only the exploration inequalities S1 and Se, Sigma free.
  sdp::ConicProgram relaxed;
  const auto w = relaxed.add_symmetric("W_e", 2);
  const auto z = relaxed.add_rectangular("Z_e", 2, 1);
  const auto y = relaxed.add_symmetric("Y_e", 3);
  const auto sg = relaxed.add_symmetric("Sigma", 1);
  relaxed.add_geq(
      lmi::s1_block(relaxed.var(w), relaxed.var(y), relaxed.var(z), ed.Q, ed.R),
      "S1");
  relaxed.add_geq(
      lmi::se_block(rep.design.hyper.t_e, relaxed.var(z), relaxed.var(w),
                    relaxed.var(sg), ed.D0.D.mat(), ed.A0, ed.B0,
                    ed.D0.sigma_w),
      "Se");
  relaxed.set_objective_trace(relaxed.var(y));
  const sdp::SolverReport rep_relaxed = sdp::solve(relaxed);
  REQUIRE(rep_relaxed.status == sdp::SolverStatus::Optimal);
  CHECK(rep_relaxed.objective_value <=
        rep.design.exploration_cost + 1e-6 * (1.0 + rep.design.exploration_cost));
}

TEST_CASE("feasible set is convex: midpoints of two solutions stay feasible") {
  const synthesis::RunReport& rep = desk_report();
  lmi::GainSchedulingData gs;
  gs.A0 = rep.est0.A_hat;
  gs.B0 = rep.est0.B_hat;
  gs.perf = desk_config().perf;
  gs.dims = {2, 1, 2};
  lmi::ExplorationData ed;
  ed.A0 = rep.est0.A_hat;
  ed.B0 = rep.est0.B_hat;
  ed.D0 = rep.D0;
  ed.Q = MatrixXd::Identity(2, 2);
  ed.R = MatrixXd::Identity(1, 1);
  sdp::ConicProgram p = synthesis::build_dual_sdp(gs, ed, 1000.0, rep.k0.K0,
                                                  rep.design.hyper);
  const sdp::SolverReport a = sdp::solve(p);
  REQUIRE(a.status == sdp::SolverStatus::Optimal);

  // Second feasible point: different objective over the same constraints.
  sdp::ConicProgram p2 = synthesis::build_dual_sdp(gs, ed, 1000.0, rep.k0.K0,
                                                   rep.design.hyper);
  sdp::VarHandle n_handle;
  for (std::size_t i = 0; i < p2.variables().size(); ++i) {
    if (p2.variables()[i].name == "N") n_handle.id = static_cast<int>(i);
  }
  p2.set_objective_trace(p2.var(n_handle));
  const sdp::SolverReport b = sdp::solve(p2);
  REQUIRE(b.status == sdp::SolverStatus::Optimal);

  std::map<std::string, MatrixXd> mid;
  for (const auto& [name, val] : a.assignment) {
    mid[name] = 0.5 * (val + b.assignment.at(name));
  }
  CHECK(sdp::check_assignment(p, mid) <= 1e-6);
}

TEST_CASE("line_search: singleton grid equals the direct solve") {
  const synthesis::RunReport& rep = desk_report();
  lmi::GainSchedulingData gs;
  gs.A0 = rep.est0.A_hat;
  gs.B0 = rep.est0.B_hat;
  gs.perf = desk_config().perf;
  gs.dims = {2, 1, 2};
  lmi::ExplorationData ed;
  ed.A0 = rep.est0.A_hat;
  ed.B0 = rep.est0.B_hat;
  ed.D0 = rep.D0;
  ed.Q = MatrixXd::Identity(2, 2);
  ed.R = MatrixXd::Identity(1, 1);

  const Hyperparams h = rep.design.hyper;
  HyperGrids grid;
  grid.eps = {h.eps};
  grid.t_e = {h.t_e};
  grid.lambda_s = {h.lambda_s};
  grid.lambda_u = {h.lambda_u};
  const synthesis::LineSearchResult single =
      synthesis::line_search(gs, ed, 1000.0, rep.k0.K0, grid, 1);
  CHECK(single.statuses.size() == 1);
  CHECK(single.best.exploration_cost ==
        doctest::Approx(rep.design.exploration_cost).epsilon(1e-6));
  CHECK((single.best.K - rep.design.K).norm() <
        1e-4 * (1.0 + rep.design.K.norm()));
}

TEST_CASE("line_search: refinement never increases the best cost") {
  const synthesis::RunReport& rep = desk_report();
  lmi::GainSchedulingData gs;
  gs.A0 = rep.est0.A_hat;
  gs.B0 = rep.est0.B_hat;
  gs.perf = desk_config().perf;
  gs.dims = {2, 1, 2};
  lmi::ExplorationData ed;
  ed.A0 = rep.est0.A_hat;
  ed.B0 = rep.est0.B_hat;
  ed.D0 = rep.D0;
  ed.Q = MatrixXd::Identity(2, 2);
  ed.R = MatrixXd::Identity(1, 1);

  HyperGrids coarse = desk_config().grids;
  HyperGrids fine = coarse;
  fine.lambda_u.push_back(100.0);
  fine.eps.push_back(2.0);
  const synthesis::LineSearchResult c =
      synthesis::line_search(gs, ed, 1000.0, rep.k0.K0, coarse, 2);
  const synthesis::LineSearchResult f =
      synthesis::line_search(gs, ed, 1000.0, rep.k0.K0, fine, 2);
  CHECK(f.best.exploration_cost <=
        c.best.exploration_cost + 1e-7 * (1.0 + c.best.exploration_cost));
}

TEST_CASE("line_search: infeasible extremes are skipped, feasible point wins") {
  const synthesis::RunReport& rep = desk_report();
  lmi::GainSchedulingData gs;
  gs.A0 = rep.est0.A_hat;
  gs.B0 = rep.est0.B_hat;
  gs.perf = desk_config().perf;
  gs.dims = {2, 1, 2};
  lmi::ExplorationData ed;
  ed.A0 = rep.est0.A_hat;
  ed.B0 = rep.est0.B_hat;
  ed.D0 = rep.D0;
  ed.Q = MatrixXd::Identity(2, 2);
  ed.R = MatrixXd::Identity(1, 1);

  HyperGrids grid;
  grid.eps = {rep.design.hyper.eps};
  grid.t_e = {rep.design.hyper.t_e};
  // lambda extremes far outside the workable band are infeasible.
  grid.lambda_s = {1e-8, rep.design.hyper.lambda_s};
  grid.lambda_u = {rep.design.hyper.lambda_u};
  const synthesis::LineSearchResult ls =
      synthesis::line_search(gs, ed, 1000.0, rep.k0.K0, grid, 1);
  int optimal = 0;
  for (const auto& s : ls.statuses) {
    optimal += s.status == sdp::SolverStatus::Optimal;
  }
  CHECK(optimal >= 1);
  CHECK(optimal < static_cast<int>(ls.statuses.size()));
  CHECK(ls.best.hyper.lambda_s == rep.design.hyper.lambda_s);
}

TEST_CASE("recover_controllers: exact recovery and residual oracle") {
  RngStream rng(5);
  const MatrixXd w = oracles::random_pd(3, rng, 0.5);
  const MatrixXd k = oracles::random_matrix(1, 3, rng);
  const MatrixXd z = w * k.transpose();
  const MatrixXd n = oracles::random_pd(3, rng, 0.5);
  const MatrixXd m = k * n;
  const auto [k_e, k_rec] = synthesis::recover_controllers(
      matkit::SymMatrix(w), z, matkit::SymMatrix(n), m);
  CHECK((k_e - k).norm() < 1e-10 * (1.0 + k.norm()));
  CHECK((k_rec - k).norm() < 1e-10 * (1.0 + k.norm()));

  const MatrixXd z_rand = oracles::random_matrix(3, 1, rng);
  const auto [k_e2, unused] = synthesis::recover_controllers(
      matkit::SymMatrix(w), z_rand, matkit::SymMatrix(n), m);
  CHECK((k_e2 * w - z_rand.transpose()).norm() < 1e-10);
}

TEST_CASE("k_new: identity cases, hand value, and ill-posedness") {
  estimate::Estimate est0, estT;
  est0.A_hat = MatrixXd::Constant(1, 1, 0.5);
  est0.B_hat = MatrixXd::Constant(1, 1, 1.0);

  const MatrixXd k = MatrixXd::Constant(1, 1, 1.0);
  const MatrixXd ks = MatrixXd::Constant(1, 1, 0.5);

  // Delta_s = 0 leaves the gain untouched.
  estT = est0;
  CHECK(synthesis::k_new(k, ks, est0, estT).K_new(0, 0) ==
        doctest::Approx(1.0));

  // Ks = 0 ignores the estimate shift entirely.
  estT.A_hat = MatrixXd::Constant(1, 1, 0.9);
  estT.B_hat = MatrixXd::Constant(1, 1, 1.7);
  CHECK(synthesis::k_new(k, MatrixXd::Zero(1, 1), est0, estT).K_new(0, 0) ==
        doctest::Approx(1.0));

  // Hand arithmetic: (1 + 0.5*0.2) / (1 - 0.5*0.4) = 1.1 / 0.8 = 1.375.
  estT.A_hat = MatrixXd::Constant(1, 1, 0.7);
  estT.B_hat = MatrixXd::Constant(1, 1, 1.4);
  CHECK(synthesis::k_new(k, ks, est0, estT).K_new(0, 0) ==
        doctest::Approx(1.375).epsilon(1e-12));

  // Ks dB = 1 makes I - Ks dB singular.
  estT.B_hat = MatrixXd::Constant(1, 1, 3.0);
  CHECK_THROWS_AS(synthesis::k_new(k, ks, est0, estT), IllPosedController);
}

TEST_CASE("run_algorithm1: desk instance produces a certified design") {
  const synthesis::RunReport& rep = desk_report();
  CHECK(rep.design.exploration_cost > 0.0);
  CHECK(rep.wellposed_sigma_min > 1e-9);
  CHECK(matkit::is_definite(rep.design.N, matkit::Definite::Pos, 0.0));
  CHECK(matkit::is_definite(rep.design.Ds, matkit::Definite::Pos, 0.0));
  CHECK(matkit::is_definite(rep.design.DbarT, matkit::Definite::Pos, 0.0));
  CHECK(matkit::is_definite(rep.design.Sigma, matkit::Definite::Psd, 0.0));

  // Lemma 2's chain holds numerically: X = N^-1 renders Eq.16 negative.
  lmi::GainSchedulingData gs;
  gs.A0 = rep.est0.A_hat;
  gs.B0 = rep.est0.B_hat;
  gs.perf = desk_config().perf;
  gs.dims = {2, 1, 2};
  const matkit::SymMatrix m16 = lmi::analysis_lmi_fixed(
      rep.design.K, rep.design.K_s,
      matkit::SymMatrix(rep.design.N.mat().inverse()),
      rep.design.hyper.lambda_s, rep.design.hyper.lambda_u, rep.design.Ds,
      rep.design.DbarT, gs);
  CHECK(matkit::is_definite(m16, matkit::Definite::Neg, 0.0));
}

TEST_CASE("run_algorithm1: DbarT sits below the predicted information matrix") {
  const synthesis::RunReport& rep = desk_report();
  const double coeff = 1000.0 / (0.01 * rep.c_delta);
  const MatrixXd w = rep.design.W_e.mat();
  const MatrixXd z = rep.design.Z_e;

  // Exact predicted information with Z_e' W_e^-1 Z_e (and Sigma).
  MatrixXd predicted(3, 3);
  predicted << w, z, z.transpose(),
      z.transpose() * w.inverse() * z + rep.design.Sigma.mat();
  const MatrixXd slack =
      rep.D0.D.mat() + coeff * predicted - rep.design.DbarT.mat();
  CHECK(matkit::is_definite(matkit::SymMatrix(slack), matkit::Definite::Psd,
                            1e-9));
}

TEST_CASE("run_algorithm1: deterministic given the seed") {
  const synthesis::RunReport a =
      synthesis::run_algorithm1(desk_config(777), desk_system());
  const synthesis::RunReport b =
      synthesis::run_algorithm1(desk_config(777), desk_system());
  CHECK((a.design.K - b.design.K).norm() == 0.0);
  CHECK((a.final_ctrl.K_new - b.final_ctrl.K_new).norm() == 0.0);
  CHECK(a.design.exploration_cost == b.design.exploration_cost);
  CHECK((a.estT.A_hat - b.estT.A_hat).norm() == 0.0);
}

TEST_CASE("run_algorithm1: too little data fails at the estimate stage") {
  synthesis::PipelineConfig cfg = desk_config();
  cfg.n0 = 2;  // fewer samples than regressor dimension
  try {
    synthesis::run_algorithm1(cfg, desk_system());
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.family() == ErrorFamily::Numerical);
    CHECK(std::string(e.what()).find("stage estimate") != std::string::npos);
    CHECK(std::string(e.what()).find("RankDeficient") != std::string::npos);
  }
}

TEST_CASE("exploration cost is monotone non-increasing in T") {
  const synthesis::RunReport& rep = desk_report();
  lmi::GainSchedulingData gs;
  gs.A0 = rep.est0.A_hat;
  gs.B0 = rep.est0.B_hat;
  gs.perf = desk_config().perf;
  gs.dims = {2, 1, 2};
  lmi::ExplorationData ed;
  ed.A0 = rep.est0.A_hat;
  ed.B0 = rep.est0.B_hat;
  ed.D0 = rep.D0;
  ed.Q = MatrixXd::Identity(2, 2);
  ed.R = MatrixXd::Identity(1, 1);
  HyperGrids grid;
  grid.eps = {rep.design.hyper.eps};
  grid.t_e = {rep.design.hyper.t_e};
  grid.lambda_s = {rep.design.hyper.lambda_s};
  grid.lambda_u = {rep.design.hyper.lambda_u};

  const double cost_T = synthesis::line_search(gs, ed, 1000.0, rep.k0.K0,
                                               grid, 1)
                            .best.exploration_cost;
  const double cost_2T = synthesis::line_search(gs, ed, 2000.0, rep.k0.K0,
                                                grid, 1)
                             .best.exploration_cost;
  CHECK(cost_2T <= cost_T + 1e-6 * (1.0 + cost_T));
}

TEST_CASE("noise/confidence scaling: kappa moves only the exploration cost") {
  const synthesis::RunReport& rep = desk_report();
  lmi::GainSchedulingData gs;
  gs.A0 = rep.est0.A_hat;
  gs.B0 = rep.est0.B_hat;
  gs.perf = desk_config().perf;
  gs.dims = {2, 1, 2};

  auto solve_scaled = [&](double kappa) {
    lmi::ExplorationData ed;
    ed.A0 = rep.est0.A_hat;
    ed.B0 = rep.est0.B_hat;
    ed.D0 = rep.D0;               // D0 held fixed
    ed.D0.c_delta *= kappa;       // sigma_w^2 c_delta scaled through c_delta
    ed.Q = MatrixXd::Identity(2, 2);
    ed.R = MatrixXd::Identity(1, 1);
    HyperGrids grid;
    grid.eps = {rep.design.hyper.eps};
    grid.t_e = {kappa * rep.design.hyper.t_e};
    grid.lambda_s = {rep.design.hyper.lambda_s};
    grid.lambda_u = {rep.design.hyper.lambda_u};
    return synthesis::line_search(gs, ed, 1000.0, rep.k0.K0, grid, 1).best;
  };

  const DualDesign base = solve_scaled(1.0);
  for (double kappa : {0.5, 2.0}) {
    const DualDesign scaled = solve_scaled(kappa);
    CHECK((scaled.K - base.K).norm() <= 1e-4 * (1.0 + base.K.norm()));
    CHECK((scaled.K_s - base.K_s).norm() <= 1e-4 * (1.0 + base.K_s.norm()));
    CHECK(scaled.exploration_cost ==
          doctest::Approx(kappa * base.exploration_cost).epsilon(1e-3));
  }
}
