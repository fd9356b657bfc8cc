#include "dualgs/synthesis.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace dualgs::synthesis {

using sdp::AffineMat;
using sdp::ConicProgram;
using sdp::SolverReport;
using sdp::SolverStatus;

RobustLqrResult robust_lqr_K0(const lmi::ExplorationData& ed, double t_e) {
  ed.validate();
  if (!(t_e > 0.0)) throw DomainError("robust_lqr_K0: t_e must be > 0");
  const int nx = static_cast<int>(ed.A0.rows());
  const int nu = static_cast<int>(ed.B0.cols());
  const double sigma_w = ed.D0.sigma_w;

  ConicProgram p;
  const auto w_e = p.add_symmetric("W_e", nx);
  const auto z_e = p.add_rectangular("Z_e", nx, nu);
  const auto y_e = p.add_symmetric("Y_e", nx + nu);
  const MatrixXd sigma_seed =
      1e-3 * sigma_w * sigma_w * MatrixXd::Identity(nu, nu);

  p.add_geq(lmi::s1_block(p.var(w_e), p.var(y_e), p.var(z_e), ed.Q, ed.R),
            "S1");
  p.add_geq(lmi::se_block(t_e, p.var(z_e), p.var(w_e),
                          AffineMat::constant(sigma_seed), ed.D0.D.mat(),
                          ed.A0, ed.B0, sigma_w),
            "Se");
  p.set_objective_trace(p.var(y_e));

  const SolverReport report = sdp::solve(p);
  if (report.status == SolverStatus::Infeasible) {
    throw AllInfeasible(
        "robust LQR infeasible: no robustly stabilizing gain at this "
        "uncertainty level (enlarge N0 or delta)");
  }
  if (report.status != SolverStatus::Optimal) {
    throw NumericalFailure("robust LQR solve failed: " + report.message);
  }

  RobustLqrResult res;
  res.W_e = matkit::SymMatrix(report.assignment.at("W_e"));
  res.Z_e = report.assignment.at("Z_e");
  res.cost = report.objective_value;
  res.t_e = t_e;
  res.K0 = res.Z_e.transpose() * res.W_e.mat().llt().solve(
                                     MatrixXd::Identity(nx, nx));
  return res;
}

RobustLqrResult robust_lqr_K0_search(const lmi::ExplorationData& ed,
                                     const std::vector<double>& te_grid) {
  if (te_grid.empty()) throw DomainError("robust_lqr_K0_search: empty grid");
  RobustLqrResult best;
  bool found = false;
  std::string last_message;
  for (double te : te_grid) {
    try {
      RobustLqrResult res = robust_lqr_K0(ed, te);
      if (!found || res.cost < best.cost) {
        best = res;
        found = true;
      }
    } catch (const Error& e) {
      last_message = e.what();
    }
  }
  if (!found) {
    throw AllInfeasible("robust LQR infeasible on every t_e grid point (" +
                        last_message + ")");
  }
  return best;
}

ConicProgram build_dual_sdp(const lmi::GainSchedulingData& gs,
                            const lmi::ExplorationData& ed, double T_explore,
                            const MatrixXd& K0, const Hyperparams& hyper) {
  gs.validate();
  ed.validate();
  if (T_explore < 1.0) throw DomainError("build_dual_sdp: T must be >= 1");
  const int nx = gs.dims.nx;
  const int nu = gs.dims.nu;
  const double sigma_w = ed.D0.sigma_w;
  const double c_delta = ed.D0.c_delta;
  const MatrixXd d0 = ed.D0.D.mat();

  ConicProgram p;
  const auto w_e = p.add_symmetric("W_e", nx);
  const auto z_e = p.add_rectangular("Z_e", nx, nu);
  const auto y_e = p.add_symmetric("Y_e", nx + nu);
  const auto sigma = p.add_symmetric("Sigma", nu);
  const auto ks = p.add_rectangular("Ks", nu, nx);
  const auto m = p.add_rectangular("M", nu, nx);
  const auto n = p.add_symmetric("N", nx);
  const auto dbar_t = p.add_symmetric("DbarT", nx + nu);
  const auto d_s = p.add_symmetric("Ds", nx + nu);

  p.add_geq(lmi::s1_block(p.var(w_e), p.var(y_e), p.var(z_e), ed.Q, ed.R),
            "22b:S1");
  p.add_geq(lmi::se_block(hyper.t_e, p.var(z_e), p.var(w_e), p.var(sigma), d0,
                          ed.A0, ed.B0, sigma_w),
            "22c:Se");
  {
    const AffineMat s2 =
        lmi::s2_gain_sched(p.var(ks), p.var(m), p.var(n), hyper.lambda_s,
                           hyper.lambda_u, p.var(d_s), p.var(dbar_t), gs);
    p.add_leq(s2, "22d:S2", ConicProgram::strict_margin(s2));
  }
  {
    const AffineMat s3 = lmi::s3_block(hyper.eps, d0, p.var(dbar_t), p.var(d_s));
    p.add_geq(s3, "22e:S3", ConicProgram::strict_margin(s3));
  }
  {
    const AffineMat dbar =
        lmi::dbar_constraint(p.var(w_e), p.var(z_e), p.var(sigma),
                             p.var(dbar_t), K0, d0, T_explore, sigma_w, c_delta);
    p.add_geq(dbar, "22f:DbarT", ConicProgram::strict_margin(dbar));
  }
  p.set_objective_trace(p.var(y_e));
  return p;
}

DualDesign design_from_assignment(
    const std::map<std::string, MatrixXd>& assignment, double objective,
    const Hyperparams& hyper) {
  DualDesign d;
  d.W_e = matkit::SymMatrix(assignment.at("W_e"));
  d.Z_e = assignment.at("Z_e");
  // Solver output is epsilon-feasible; clamp stray negative eigenvalues so
  // the excitation covariance is exactly PSD for sampling.
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(assignment.at("Sigma"));
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    d.Sigma = matkit::SymMatrix(es.eigenvectors() * ev.asDiagonal() *
                                es.eigenvectors().transpose());
  }
  d.K_s = assignment.at("Ks");
  d.M = assignment.at("M");
  d.N = matkit::SymMatrix(assignment.at("N"));
  d.DbarT = matkit::SymMatrix(assignment.at("DbarT"));
  d.Ds = matkit::SymMatrix(assignment.at("Ds"));
  std::tie(d.K_e, d.K) = recover_controllers(d.W_e, d.Z_e, d.N, d.M);
  d.exploration_cost = objective;
  d.hyper = hyper;
  return d;
}

LineSearchResult line_search(const lmi::GainSchedulingData& gs,
                             const lmi::ExplorationData& ed, double T_explore,
                             const MatrixXd& K0, const HyperGrids& grids,
                             int jobs) {
  if (grids.eps.empty() || grids.t_e.empty() || grids.lambda_s.empty() ||
      grids.lambda_u.empty()) {
    throw DomainError("line_search: empty hyperparameter grid");
  }
  std::vector<Hyperparams> points;
  for (double e : grids.eps) {
    for (double te : grids.t_e) {
      for (double ls : grids.lambda_s) {
        for (double lu : grids.lambda_u) {
          points.push_back({e, te, ls, lu});
        }
      }
    }
  }

  struct PointResult {
    GridPointStatus status;
    std::map<std::string, MatrixXd> assignment;
  };
  std::vector<PointResult> results(points.size());

  auto solve_point = [&](std::size_t i) {
    const Hyperparams& h = points[i];
    PointResult& r = results[i];
    r.status.hyper = h;
    try {
      const ConicProgram p = build_dual_sdp(gs, ed, T_explore, K0, h);
      const SolverReport rep = sdp::solve(p);
      r.status.status = rep.status;
      r.status.objective = rep.objective_value;
      r.status.iterations = rep.iterations;
      if (rep.status == SolverStatus::Optimal) r.assignment = rep.assignment;
    } catch (const Error&) {
      r.status.status = SolverStatus::NumericalFailure;
    }
  };

  const int workers = std::max(1, jobs);
  if (workers == 1 || points.size() == 1) {
    for (std::size_t i = 0; i < points.size(); ++i) solve_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < points.size();
             i = next.fetch_add(1)) {
          solve_point(i);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  LineSearchResult out;
  out.statuses.reserve(results.size());
  int best = -1;
  for (std::size_t i = 0; i < results.size(); ++i) {
    out.statuses.push_back(results[i].status);
    if (results[i].status.status == SolverStatus::Optimal &&
        (best < 0 || results[i].status.objective <
                         results[static_cast<std::size_t>(best)].status.objective)) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    throw AllInfeasible("no hyperparameter grid point yields a feasible design");
  }
  const PointResult& winner = results[static_cast<std::size_t>(best)];
  out.best = design_from_assignment(winner.assignment, winner.status.objective,
                                    winner.status.hyper);
  return out;
}

std::pair<MatrixXd, MatrixXd> recover_controllers(const matkit::SymMatrix& W_e,
                                                  const MatrixXd& Z_e,
                                                  const matkit::SymMatrix& N,
                                                  const MatrixXd& M) {
  Eigen::LLT<MatrixXd> llt_w(W_e.mat());
  Eigen::LLT<MatrixXd> llt_n(N.mat());
  if (llt_w.info() != Eigen::Success || llt_n.info() != Eigen::Success) {
    throw SingularMatrix("recover_controllers: W_e or N not positive definite");
  }
  // K_e = Z_e' W_e^-1 and K = M N^-1 via transposed solves.
  const MatrixXd k_e = llt_w.solve(Z_e).transpose();
  const MatrixXd k = llt_n.solve(M.transpose()).transpose();
  return {k_e, k};
}

plant::Trajectory explore(const plant::LtiSystem& sys, const MatrixXd& K_e,
                          const matkit::SymMatrix& Sigma, int T_explore,
                          const VectorXd& x_start, RngStream& rng) {
  if (T_explore < 1) throw DomainError("explore: T must be >= 1");
  plant::Policy policy;
  policy.K = K_e;
  policy.Sigma = Sigma.mat();
  return plant::simulate(sys, policy, x_start, T_explore, rng);
}

FinalController k_new(const MatrixXd& K, const MatrixXd& Ks,
                      const estimate::Estimate& est0,
                      const estimate::Estimate& estT) {
  const int nu = static_cast<int>(K.rows());
  const MatrixXd dA = estT.A_hat - est0.A_hat;
  const MatrixXd dB = estT.B_hat - est0.B_hat;
  const MatrixXd lhs = MatrixXd::Identity(nu, nu) - Ks * dB;

  Eigen::JacobiSVD<MatrixXd> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  if (smin < 1e-9 * (1.0 + (Ks * dB).norm())) {
    throw IllPosedController(
        "I - Ks (B_T - B_0) is singular (sigma_min = " + std::to_string(smin) +
        "); the realized scheduling shift lies outside the certified set");
  }

  FinalController fc;
  fc.K_new = lhs.lu().solve(K + Ks * dA);
  fc.estimates_T = estT;

  // Fixed point of the implicit law u = K x + Ks (dA x + dB u) at u = K_new x,
  // checked on basis states.
  const int nx = static_cast<int>(K.cols());
  for (int i = 0; i < nx; ++i) {
    const VectorXd x = VectorXd::Unit(nx, i);
    const VectorXd u = fc.K_new * x;
    const VectorXd residual = K * x + Ks * (dA * x + dB * u) - u;
    if (residual.norm() > 1e-8 * (1.0 + u.norm())) {
      throw NumericalFailure("k_new fixed-point verification failed");
    }
  }
  return fc;
}

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.family(), std::string("stage ") + stage + ": " + e.what());
  }
}

}  // namespace

RunReport run_algorithm1(const PipelineConfig& cfg,
                         const plant::LtiSystem& true_sys) {
  true_sys.validate();
  const int nx = true_sys.nx();
  const int nu = true_sys.nu();
  cfg.perf.validate(nx, nu);
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw ConfigError("delta must lie in (0, 1)");
  }

  RunReport report;
  report.seed = cfg.seed;
  report.c_delta = estimate::chi2_quantile(nx * nx + nx * nu, cfg.delta);

  // Step 2: random persistently exciting initial exploration from x = 0.
  run_stage("estimate", [&] {
    RngStream rng = RngStream::derive(cfg.seed, "initial-exploration");
    plant::Policy random_input;
    random_input.K = MatrixXd::Zero(nu, nx);
    random_input.Sigma = cfg.initial_input_std * cfg.initial_input_std *
                         MatrixXd::Identity(nu, nu);
    report.initial_traj = plant::simulate(true_sys, random_input,
                                          VectorXd::Zero(nx), cfg.n0, rng);
    estimate::DataSet data0;
    data0.append(report.initial_traj);
    report.est0 = estimate::least_squares(data0);
    report.D0 = estimate::info_matrix(data0, true_sys.sigma_w, report.c_delta);
    return 0;
  });

  lmi::ExplorationData ed;
  ed.A0 = report.est0.A_hat;
  ed.B0 = report.est0.B_hat;
  ed.D0 = report.D0;
  ed.Q = cfg.Q;
  ed.R = cfg.R;

  report.k0 = run_stage("design",
                        [&] { return robust_lqr_K0_search(ed, cfg.k0_te_grid); });

  lmi::GainSchedulingData gs;
  gs.A0 = report.est0.A_hat;
  gs.B0 = report.est0.B_hat;
  gs.perf = cfg.perf;
  gs.dims = {nx, nu, cfg.perf.nz()};

  // Step 3: line-searched combined SDP.
  run_stage("design", [&] {
    LineSearchResult ls = line_search(gs, ed, cfg.T_explore, report.k0.K0,
                                      cfg.grids, cfg.jobs);
    report.design = std::move(ls.best);
    report.statuses = std::move(ls.statuses);
    return 0;
  });

  // Step 4: targeted exploration continuing from the initial phase's state.
  run_stage("explore", [&] {
    RngStream rng = RngStream::derive(cfg.seed, "targeted-exploration");
    report.explore_traj =
        explore(true_sys, report.design.K_e, report.design.Sigma,
                cfg.T_explore, report.initial_traj.states.back(), rng);
    return 0;
  });

  // Step 5: re-estimation on the union of both data sets.
  run_stage("explore", [&] {
    estimate::DataSet all;
    all.append(report.initial_traj);
    estimate::DataSet explore_data;
    explore_data.append(report.explore_traj);
    all.append(explore_data);
    report.estT = estimate::least_squares(all);
    report.DT = estimate::accumulate(report.D0, explore_data);
    return 0;
  });

  // Step 6: explicit final feedback.
  report.delta_s_realized = MatrixXd(nx, nx + nu);
  report.delta_s_realized << report.estT.A_hat - report.est0.A_hat,
      report.estT.B_hat - report.est0.B_hat;
  run_stage("k_new", [&] {
    try {
      report.final_ctrl =
          k_new(report.design.K, report.design.K_s, report.est0, report.estT);
    } catch (const IllPosedController& e) {
      // Attach the certified-set diagnostic before propagating.
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(
          report.delta_s_realized.transpose() * report.delta_s_realized);
      Eigen::SelfAdjointEigenSolver<MatrixXd> bound(report.design.Ds.mat());
      throw IllPosedController(
          std::string(e.what()) + " [||Delta_s||^2 = " +
          std::to_string(es.eigenvalues().maxCoeff()) +
          ", certified bound lambda_min(Ds)^-1 = " +
          std::to_string(1.0 / bound.eigenvalues().minCoeff()) + "]");
    }
    const MatrixXd lhs =
        MatrixXd::Identity(nu, nu) -
        report.design.K_s * (report.estT.B_hat - report.est0.B_hat);
    Eigen::JacobiSVD<MatrixXd> svd(lhs);
    report.wellposed_sigma_min = svd.singularValues().minCoeff();
    return 0;
  });

  return report;
}

}  // namespace dualgs::synthesis
