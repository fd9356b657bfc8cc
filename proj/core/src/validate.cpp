#include "dualgs/validate.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "json_util.hpp"

namespace dualgs::validate {

using sdp::AffineMat;
using sdp::ConicProgram;
using sdp::SolverReport;
using sdp::SolverStatus;

void ValidationConfig::validate() const {
  if (n_trials < 1) throw ConfigError("validation.n_trials must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("validation.delta must lie in (0, 1)");
  }
  if (horizon < 2) throw ConfigError("validation.horizon must be >= 2");
  if (boundary_fraction < 0.0 || boundary_fraction > 1.0) {
    throw ConfigError("validation.boundary_fraction must lie in [0, 1]");
  }
}

bool certify_fixed(const synthesis::DualDesign& design,
                   const lmi::GainSchedulingData& gs) {
  const int nx = gs.dims.nx;
  ConicProgram p;
  const auto x = p.add_symmetric("X", nx);
  const auto ls = p.add_scalar("lambda_s");
  const auto lu = p.add_scalar("lambda_u");

  const AffineMat expr =
      lmi::analysis_lmi(p.var(x), p.var(ls), p.var(lu), design.K, design.K_s,
                        design.Ds, design.DbarT, gs);
  p.add_leq(expr, "analysis", ConicProgram::strict_margin(expr));
  p.add_geq(p.var(x), "X_pd", 1e-7);
  p.add_geq(p.var(ls), "lambda_s_pos", 1e-9);
  p.add_geq(p.var(lu), "lambda_u_pos", 1e-9);
  // Minimize tr(X) + lambda_s + lambda_u for a deterministic certificate.
  p.set_objective_trace(sdp::affine_block(
      {{p.var(x), AffineMat::zero(nx, 1), AffineMat::zero(nx, 1)},
       {AffineMat::zero(1, nx), p.var(ls), AffineMat::zero(1, 1)},
       {AffineMat::zero(1, nx), AffineMat::zero(1, 1), p.var(lu)}}));

  const SolverReport report = sdp::solve(p);
  if (report.status == SolverStatus::Optimal) return true;
  if (report.status == SolverStatus::Infeasible) return false;
  throw CertificationFailed("analysis SDP could not be decided: " +
                            report.message);
}

std::optional<double> closed_loop_perf_margin(const MatrixXd& A_cl,
                                              const MatrixXd& C_cl,
                                              const MatrixXd& D_cl,
                                              const plant::PerfChannel& pc) {
  const int nx = static_cast<int>(A_cl.rows());
  const int nz = static_cast<int>(C_cl.rows());
  if (C_cl.cols() != nx || D_cl.rows() != nz || D_cl.cols() != nx) {
    throw ShapeMismatch("closed_loop_perf_margin: shapes");
  }

  // Dissipation form on [x; w]: [A I]'P[A I] - diag(P, 0)
  //   + [0 I; C D]' Pp [0 I; C D] + eps * diag(0, I) <= 0, P > 0.
  MatrixXd stacked(nx + nz, 2 * nx);  // rows map [x;w] -> [w; z]
  stacked.topRows(nx) << MatrixXd::Zero(nx, nx), MatrixXd::Identity(nx, nx);
  stacked.bottomRows(nz) << C_cl, D_cl;
  MatrixXd perf_mult(nx + nz, nx + nz);
  perf_mult << pc.Qp, pc.Sp, pc.Sp.transpose(), pc.Rp;
  const MatrixXd const_term = stacked.transpose() * perf_mult * stacked;

  MatrixXd a_ext(nx, 2 * nx);
  a_ext << A_cl, MatrixXd::Identity(nx, nx);
  MatrixXd e_x = MatrixXd::Zero(nx, 2 * nx);
  e_x.leftCols(nx).setIdentity();
  MatrixXd e_w = MatrixXd::Zero(2 * nx, 2 * nx);
  e_w.bottomRightCorner(nx, nx).setIdentity();

  ConicProgram p;
  const auto pv = p.add_symmetric("P", nx);
  const auto eps = p.add_scalar("eps");
  const AffineMat diss =
      p.var(pv).left_mul(a_ext.transpose()).right_mul(a_ext) -
      p.var(pv).left_mul(e_x.transpose()).right_mul(e_x) +
      AffineMat::constant(const_term) + sdp::scalar_expand(p.var(eps), e_w);
  p.add_leq(diss, "dissipation");
  p.add_geq(p.var(pv), "P_pd", 1e-9);
  p.set_objective_trace((-1.0) * p.var(eps));  // maximize eps

  const SolverReport report = sdp::solve(p);
  if (report.status == SolverStatus::Optimal) {
    return report.assignment.at("eps")(0, 0);
  }
  if (report.status == SolverStatus::Infeasible) return std::nullopt;
  throw NumericalFailure("perf-margin SDP failed: " + report.message);
}

MatrixXd effective_gain(const MatrixXd& K, const MatrixXd& Ks,
                        const MatrixXd& delta_s, int nx, int nu) {
  const MatrixXd dA = delta_s.leftCols(nx);
  const MatrixXd dB = delta_s.rightCols(nu);
  const MatrixXd lhs = MatrixXd::Identity(nu, nu) - Ks * dB;
  Eigen::JacobiSVD<MatrixXd> svd(lhs);
  if (svd.singularValues().minCoeff() < 1e-12) {
    throw IllPosedController("effective_gain: I - Ks dB singular");
  }
  return lhs.lu().solve(K + Ks * dA);
}

bool in_delta_set(const MatrixXd& delta, const uncertainty::DeltaBound& bound) {
  const MatrixXd gram = delta.transpose() * delta;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(bound.P.mat() - gram,
                                             Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, bound.P.mat().norm());
  return es.eigenvalues().minCoeff() >= -1e-9 * scale;
}

namespace {

struct FrozenLoop {
  MatrixXd A_cl;
  MatrixXd C_cl;
  MatrixXd D_cl;
  MatrixXd K_eff;
};

// Closed loop for frozen (Delta_s, Delta_u): the realized plant is
// (A0 + dsA + duA, B0 + dsB + duB) under u = K_eff x.
FrozenLoop freeze_loop(const synthesis::DualDesign& design,
                       const lmi::GainSchedulingData& gs,
                       const MatrixXd& delta_s, const MatrixXd& delta_u) {
  const int nx = gs.dims.nx;
  const int nu = gs.dims.nu;
  FrozenLoop fl;
  fl.K_eff = effective_gain(design.K, design.K_s, delta_s, nx, nu);
  const MatrixXd a_real =
      gs.A0 + delta_s.leftCols(nx) + delta_u.leftCols(nx);
  const MatrixXd b_real =
      gs.B0 + delta_s.rightCols(nu) + delta_u.rightCols(nu);
  fl.A_cl = a_real + b_real * fl.K_eff;
  fl.C_cl = gs.perf.C + gs.perf.D * fl.K_eff;
  fl.D_cl = gs.perf.Dw;
  return fl;
}

std::string violation_fixture(const MatrixXd& delta_s, const MatrixXd& delta_u,
                              const std::vector<VectorXd>& disturbance) {
  detail::json j;
  j["delta_s"] = detail::matrix_to_json(delta_s);
  j["delta_u"] = detail::matrix_to_json(delta_u);
  detail::json w = detail::json::array();
  for (const VectorXd& v : disturbance) {
    w.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  }
  j["disturbance"] = std::move(w);
  return j.dump();
}

SampledPerformance sample_loop(const synthesis::DualDesign& design,
                               const lmi::GainSchedulingData& gs,
                               const ValidationConfig& cfg, double inflation) {
  cfg.validate();
  const int nx = gs.dims.nx;

  // Certified sets come from the design itself: Delta'Delta <= Ds^-1 and
  // Delta'Delta <= DbarT^-1.
  estimate::InfoMatrix ds_info, dbar_info;
  ds_info.D = design.Ds;
  dbar_info.D = design.DbarT;
  ds_info.sigma_w = dbar_info.sigma_w = 1.0;
  ds_info.c_delta = dbar_info.c_delta = 1.0;
  uncertainty::DeltaBound bound_s = uncertainty::delta_u_bound(ds_info, nx);
  uncertainty::DeltaBound bound_u = uncertainty::delta_u_bound(dbar_info, nx);
  if (inflation != 1.0) {
    bound_u.P = matkit::SymMatrix(inflation * inflation * bound_u.P.mat());
  }

  SampledPerformance out;
  out.worst_ratio = -std::numeric_limits<double>::infinity();
  out.worst_lmi_margin = std::numeric_limits<double>::infinity();

  for (int trial = 0; trial < cfg.n_trials; ++trial) {
    RngStream rng = RngStream::derive(cfg.seed, "sampled-performance", trial);
    const MatrixXd delta_s =
        uncertainty::sample_delta(bound_s, rng, cfg.boundary_fraction);
    const MatrixXd delta_u =
        uncertainty::sample_delta(bound_u, rng, cfg.boundary_fraction);
    const FrozenLoop fl = freeze_loop(design, gs, delta_s, delta_u);

    // Primary check: per-sample quadratic-performance LMI.
    const std::optional<double> margin =
        closed_loop_perf_margin(fl.A_cl, fl.C_cl, fl.D_cl, gs.perf);

    // Secondary, demonstrative check: finite L2 disturbance burst, energy
    // ratio from the simulated response.
    std::vector<VectorXd> noises(cfg.horizon, VectorXd::Zero(nx));
    for (int k = 0; k < cfg.horizon / 2; ++k) {
      for (int i = 0; i < nx; ++i) noises[k](i) = rng.gaussian();
    }
    plant::LtiSystem frozen;
    frozen.A = fl.A_cl;  // closed loop, feedback already folded in
    frozen.B = MatrixXd::Zero(nx, 1);
    frozen.sigma_w = 1.0;
    plant::Policy null_policy;
    null_policy.K = MatrixXd::Zero(1, nx);
    null_policy.Sigma = MatrixXd::Zero(1, 1);
    plant::Trajectory traj =
        plant::simulate_with_noise(frozen, null_policy, VectorXd::Zero(nx),
                                   noises);
    // z = C_cl x + D_cl w on the closed loop.
    plant::PerfChannel frozen_pc = gs.perf;
    frozen_pc.C = fl.C_cl;
    frozen_pc.D = MatrixXd::Zero(gs.dims.nz, 1);
    frozen_pc.Dw = fl.D_cl;
    const plant::QuadPerfSums sums = plant::quad_perf_lhs(frozen_pc, traj);

    ++out.samples;
    const double ratio = sums.s_ww > 0.0 ? sums.s_wz / sums.s_ww : 0.0;
    out.ratios.push_back(ratio);
    out.margins.push_back(margin.value_or(
        -std::numeric_limits<double>::infinity()));
    if (sums.s_ww > 0.0) {
      out.worst_ratio = std::max(out.worst_ratio, ratio);
    }
    if (!margin.has_value() || margin.value() <= 0.0) {
      throw PerformanceViolation(
          "sample " + std::to_string(trial) + " fails the performance LMI" +
          (margin.has_value() ? " (eps = " + std::to_string(*margin) + ")"
                              : " (no Lyapunov certificate)") +
          "; fixture: " + violation_fixture(delta_s, delta_u, noises));
    }
    out.worst_lmi_margin = std::min(out.worst_lmi_margin, margin.value());
  }
  return out;
}

}  // namespace

SampledPerformance sampled_performance(const synthesis::DualDesign& design,
                                       const lmi::GainSchedulingData& gs,
                                       const ValidationConfig& cfg) {
  return sample_loop(design, gs, cfg, 1.0);
}

SampledPerformance sampled_performance_inflated(
    const synthesis::DualDesign& design, const lmi::GainSchedulingData& gs,
    const ValidationConfig& cfg, double inflation) {
  return sample_loop(design, gs, cfg, inflation);
}

CoverageStats coverage_test(const plant::LtiSystem& true_sys,
                            const CoverageConfig& cfg) {
  if (cfg.n_trials < 100) throw DomainError("coverage_test: n_trials >= 100");
  true_sys.validate();
  const int nx = true_sys.nx();
  const int nu = true_sys.nu();
  const double c_delta =
      estimate::chi2_quantile(nx * nx + nx * nu, cfg.delta);

  int hits0 = 0, hitsT = 0, joint = 0, hits_s = 0;
  std::vector<int> hits_s_eps(cfg.eps_grid.size(), 0);

  plant::Policy random_input;
  random_input.K = MatrixXd::Zero(nu, nx);
  random_input.Sigma =
      cfg.input_std * cfg.input_std * MatrixXd::Identity(nu, nu);

  for (int trial = 0; trial < cfg.n_trials; ++trial) {
    RngStream rng = RngStream::derive(cfg.seed, "coverage", trial);
    const plant::Trajectory traj0 = plant::simulate(
        true_sys, random_input, VectorXd::Zero(nx), cfg.n0, rng);
    estimate::DataSet data0;
    data0.append(traj0);
    const estimate::Estimate est0 = estimate::least_squares(data0);
    const estimate::InfoMatrix d0 =
        estimate::info_matrix(data0, true_sys.sigma_w, c_delta);

    const plant::Trajectory trajT =
        plant::simulate(true_sys, random_input, traj0.states.back(),
                        cfg.T_explore, rng);
    estimate::DataSet all = data0;
    estimate::DataSet dataT;
    dataT.append(trajT);
    all.append(dataT);
    const estimate::Estimate estT = estimate::least_squares(all);
    const estimate::InfoMatrix dT = estimate::accumulate(d0, dataT);

    const bool in0 =
        estimate::in_credibility_region(true_sys.A, true_sys.B, est0, d0);
    const bool inT =
        estimate::in_credibility_region(true_sys.A, true_sys.B, estT, dT);
    hits0 += in0;
    hitsT += inT;
    joint += in0 && inT;

    MatrixXd delta_s(nx, nx + nu);
    delta_s << estT.A_hat - est0.A_hat, estT.B_hat - est0.B_hat;
    bool all_eps = true;
    for (std::size_t e = 0; e < cfg.eps_grid.size(); ++e) {
      const uncertainty::DeltaBound bound =
          uncertainty::delta_s_bound(cfg.eps_grid[e], d0, dT, nx);
      const bool inside = in_delta_set(delta_s, bound);
      hits_s_eps[e] += inside;
      all_eps = all_eps && inside;
    }
    hits_s += all_eps;
  }

  CoverageStats stats;
  stats.n_trials = cfg.n_trials;
  stats.cov_theta0 = static_cast<double>(hits0) / cfg.n_trials;
  stats.cov_thetaT = static_cast<double>(hitsT) / cfg.n_trials;
  stats.cov_joint = static_cast<double>(joint) / cfg.n_trials;
  stats.cov_delta_s = static_cast<double>(hits_s) / cfg.n_trials;
  for (int h : hits_s_eps) {
    stats.cov_delta_s_per_eps.push_back(static_cast<double>(h) / cfg.n_trials);
  }
  return stats;
}

Assumption2Report assumption2_check(const plant::Trajectory& traj,
                                    const synthesis::DualDesign& design,
                                    const estimate::InfoMatrix& D0, int T,
                                    double sigma_w, double c_delta) {
  const int nx = static_cast<int>(design.W_e.dim());
  const int nu = static_cast<int>(design.Sigma.dim());
  const int steps = std::min(T, traj.horizon());

  MatrixXd empirical = MatrixXd::Zero(nx + nu, nx + nu);
  VectorXd phi(nx + nu);
  for (int k = 0; k < steps; ++k) {
    phi.head(nx) = traj.states[k];
    phi.tail(nu) = traj.inputs[k];
    empirical += phi * phi.transpose();
  }

  MatrixXd predicted(nx + nu, nx + nu);
  const MatrixXd wk = design.W_e.mat() * design.K_e.transpose();
  predicted << design.W_e.mat(), wk, wk.transpose(),
      design.K_e * wk + design.Sigma.mat();
  predicted *= static_cast<double>(T);

  Assumption2Report rep;
  const double denom = predicted.norm();
  rep.discrepancy = denom > 1e-12 ? (empirical - predicted).norm() / denom
                                  : (empirical - predicted).norm();

  const MatrixXd realized_dt =
      D0.D.mat() + empirical / (sigma_w * sigma_w * c_delta);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(realized_dt - design.DbarT.mat(),
                                             Eigen::EigenvaluesOnly);
  rep.min_eig_dt_minus_dbar = es.eigenvalues().minCoeff();
  rep.dt_dominates_dbar = rep.min_eig_dt_minus_dbar >= 0.0;
  return rep;
}

Theorem1Check check_theorem1(const synthesis::RunReport& report,
                             const plant::LtiSystem& true_sys,
                             const plant::PerfChannel& pc) {
  const int nx = true_sys.nx();
  const int nu = true_sys.nu();

  lmi::GainSchedulingData gs;
  gs.A0 = report.est0.A_hat;
  gs.B0 = report.est0.B_hat;
  gs.perf = pc;
  gs.dims = {nx, nu, pc.nz()};

  MatrixXd delta_u(nx, nx + nu);
  delta_u << true_sys.A - report.estT.A_hat, true_sys.B - report.estT.B_hat;

  estimate::InfoMatrix ds_info, dbar_info;
  ds_info.D = report.design.Ds;
  dbar_info.D = report.design.DbarT;
  ds_info.sigma_w = dbar_info.sigma_w = 1.0;
  ds_info.c_delta = dbar_info.c_delta = 1.0;

  Theorem1Check check;
  check.delta_s_in_set = in_delta_set(
      report.delta_s_realized, uncertainty::delta_u_bound(ds_info, nx));
  check.delta_u_in_set =
      in_delta_set(delta_u, uncertainty::delta_u_bound(dbar_info, nx));
  check.wellposed = report.wellposed_sigma_min > 1e-9;

  if (check.wellposed) {
    const MatrixXd k_eff = report.final_ctrl.K_new;
    const MatrixXd a_cl = true_sys.A + true_sys.B * k_eff;
    const MatrixXd c_cl = pc.C + pc.D * k_eff;
    const std::optional<double> margin =
        closed_loop_perf_margin(a_cl, c_cl, pc.Dw, pc);
    check.perf_ok = margin.has_value() && margin.value() > 0.0;
  }
  return check;
}

void write_validation_csv(const std::string& path,
                          const std::vector<ValidationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorFamily::Generic, "cannot open " + path);
  out << "trial,seed,delta_s_in_set,delta_u_in_set,wellposed,perf_ok,"
         "worst_ratio,discrepancy\n";
  char buf[32];
  for (const ValidationRow& r : rows) {
    out << r.trial << ',' << r.seed << ',' << r.delta_s_in_set << ','
        << r.delta_u_in_set << ',' << r.wellposed << ',' << r.perf_ok;
    std::snprintf(buf, sizeof(buf), "%.17g", r.worst_ratio);
    out << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", r.discrepancy);
    out << ',' << buf << "\n";
  }
}

}  // namespace dualgs::validate
