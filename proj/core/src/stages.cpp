#include "dualgs/stages.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace dualgs::stages {

using detail::json;
using detail::matrix_from_json;
using detail::matrix_to_json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorFamily::Generic, "cannot write " + path);
  out << text << "\n";
}

std::string read_text(const std::string& path, const char* needed_by) {
  std::ifstream in(path);
  if (!in) {
    throw StageDependencyError(std::string(needed_by) +
                               " requires missing artifact " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* status_name(sdp::SolverStatus s) {
  switch (s) {
    case sdp::SolverStatus::Optimal: return "optimal";
    case sdp::SolverStatus::Infeasible: return "infeasible";
    case sdp::SolverStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

lmi::GainSchedulingData make_gs(const config::ScenarioConfig& cfg,
                                const estimate::Estimate& est0) {
  lmi::GainSchedulingData gs;
  gs.A0 = est0.A_hat;
  gs.B0 = est0.B_hat;
  gs.perf = cfg.perf;
  gs.dims = {cfg.system.nx(), cfg.system.nu(), cfg.perf.nz()};
  return gs;
}

lmi::ExplorationData make_ed(const config::ScenarioConfig& cfg,
                             const estimate::Estimate& est0,
                             const estimate::InfoMatrix& d0) {
  lmi::ExplorationData ed;
  ed.A0 = est0.A_hat;
  ed.B0 = est0.B_hat;
  ed.D0 = d0;
  ed.Q = cfg.Q;
  ed.R = cfg.R;
  return ed;
}

}  // namespace

std::string design_to_json(const synthesis::DualDesign& design,
                           const synthesis::RobustLqrResult& k0,
                           const std::vector<synthesis::GridPointStatus>& st) {
  json j;
  j["K_e"] = matrix_to_json(design.K_e);
  j["Sigma"] = matrix_to_json(design.Sigma.mat());
  j["K"] = matrix_to_json(design.K);
  j["Ks"] = matrix_to_json(design.K_s);
  j["N"] = matrix_to_json(design.N.mat());
  j["M"] = matrix_to_json(design.M);
  j["DbarT"] = matrix_to_json(design.DbarT.mat());
  j["Ds"] = matrix_to_json(design.Ds.mat());
  j["W_e"] = matrix_to_json(design.W_e.mat());
  j["Z_e"] = matrix_to_json(design.Z_e);
  j["exploration_cost"] = design.exploration_cost;
  j["hyper"] = {{"eps", design.hyper.eps},
                {"t_e", design.hyper.t_e},
                {"lambda_s", design.hyper.lambda_s},
                {"lambda_u", design.hyper.lambda_u}};
  j["K0"] = {{"gain", matrix_to_json(k0.K0)},
             {"cost", k0.cost},
             {"t_e", k0.t_e}};
  json statuses = json::array();
  for (const synthesis::GridPointStatus& s : st) {
    statuses.push_back({{"eps", s.hyper.eps},
                        {"t_e", s.hyper.t_e},
                        {"lambda_s", s.hyper.lambda_s},
                        {"lambda_u", s.hyper.lambda_u},
                        {"status", status_name(s.status)},
                        {"objective", s.objective},
                        {"iterations", s.iterations}});
  }
  j["grid_statuses"] = std::move(statuses);
  return j.dump(2);
}

void design_from_json(const std::string& text, synthesis::DualDesign& design,
                      synthesis::RobustLqrResult& k0) {
  json j = json::parse(text);
  design.K_e = matrix_from_json(j.at("K_e"), "K_e");
  design.Sigma = matkit::SymMatrix(matrix_from_json(j.at("Sigma"), "Sigma"));
  design.K = matrix_from_json(j.at("K"), "K");
  design.K_s = matrix_from_json(j.at("Ks"), "Ks");
  design.N = matkit::SymMatrix(matrix_from_json(j.at("N"), "N"));
  design.M = matrix_from_json(j.at("M"), "M");
  design.DbarT = matkit::SymMatrix(matrix_from_json(j.at("DbarT"), "DbarT"));
  design.Ds = matkit::SymMatrix(matrix_from_json(j.at("Ds"), "Ds"));
  design.W_e = matkit::SymMatrix(matrix_from_json(j.at("W_e"), "W_e"));
  design.Z_e = matrix_from_json(j.at("Z_e"), "Z_e");
  design.exploration_cost = j.at("exploration_cost").get<double>();
  design.hyper.eps = j.at("hyper").at("eps").get<double>();
  design.hyper.t_e = j.at("hyper").at("t_e").get<double>();
  design.hyper.lambda_s = j.at("hyper").at("lambda_s").get<double>();
  design.hyper.lambda_u = j.at("hyper").at("lambda_u").get<double>();
  k0.K0 = matrix_from_json(j.at("K0").at("gain"), "K0.gain");
  k0.cost = j.at("K0").at("cost").get<double>();
  k0.t_e = j.at("K0").at("t_e").get<double>();
}

std::string run_estimate(const config::ScenarioConfig& cfg,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  StagePaths paths{out_dir};

  const int nx = cfg.system.nx();
  const int nu = cfg.system.nu();
  RngStream rng = RngStream::derive(cfg.seed, "initial-exploration");
  plant::Policy random_input;
  random_input.K = MatrixXd::Zero(nu, nx);
  random_input.Sigma = cfg.initial_input_std * cfg.initial_input_std *
                       MatrixXd::Identity(nu, nu);
  const plant::Trajectory traj = plant::simulate(
      cfg.system, random_input, VectorXd::Zero(nx), cfg.n0, rng);

  estimate::DataSet data;
  data.append(traj);
  const estimate::Estimate est = estimate::least_squares(data);
  const double c_delta =
      estimate::chi2_quantile(nx * nx + nx * nu, cfg.delta);
  const estimate::InfoMatrix info =
      estimate::info_matrix(data, cfg.system.sigma_w, c_delta);

  plant::write_trajectory_csv(paths.initial_traj_csv(), traj);
  write_text(paths.estimate_json(), estimate::estimate_to_json(est, info));

  std::ostringstream os;
  os << "estimate: N0=" << cfg.n0 << " samples, c_delta=" << c_delta
     << ", lambda_min(D0)="
     << matkit::min_eigenvalue(info.D);
  return os.str();
}

std::string run_design(const config::ScenarioConfig& cfg,
                       const std::string& out_dir) {
  StagePaths paths{out_dir};
  estimate::Estimate est0;
  estimate::InfoMatrix d0;
  estimate::estimate_from_json(read_text(paths.estimate_json(), "design"),
                               est0, d0);

  const lmi::ExplorationData ed = make_ed(cfg, est0, d0);
  const lmi::GainSchedulingData gs = make_gs(cfg, est0);

  const synthesis::RobustLqrResult k0 =
      synthesis::robust_lqr_K0_search(ed, cfg.grids.t_e);
  const synthesis::LineSearchResult ls = synthesis::line_search(
      gs, ed, cfg.T_explore, k0.K0, cfg.grids, cfg.jobs);

  write_text(paths.design_json(), design_to_json(ls.best, k0, ls.statuses));
  {
    std::ofstream out(paths.solver_status_csv());
    out << "idx,eps,t_e,lambda_s,lambda_u,status,objective,iterations\n";
    char buf[32];
    for (std::size_t i = 0; i < ls.statuses.size(); ++i) {
      const synthesis::GridPointStatus& s = ls.statuses[i];
      out << i << ',' << s.hyper.eps << ',' << s.hyper.t_e << ','
          << s.hyper.lambda_s << ',' << s.hyper.lambda_u << ','
          << status_name(s.status) << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", s.objective);
      out << buf << ',' << s.iterations << "\n";
    }
  }

  int feasible = 0;
  for (const auto& s : ls.statuses) {
    feasible += s.status == sdp::SolverStatus::Optimal;
  }
  std::ostringstream os;
  os << "design: " << feasible << "/" << ls.statuses.size()
     << " grid points feasible, best cost=" << ls.best.exploration_cost
     << " at (eps=" << ls.best.hyper.eps << ", t_e=" << ls.best.hyper.t_e
     << ", lambda_s=" << ls.best.hyper.lambda_s
     << ", lambda_u=" << ls.best.hyper.lambda_u << ")";
  return os.str();
}

std::string run_explore(const config::ScenarioConfig& cfg,
                        const std::string& out_dir) {
  StagePaths paths{out_dir};
  estimate::Estimate est0;
  estimate::InfoMatrix d0;
  estimate::estimate_from_json(read_text(paths.estimate_json(), "explore"),
                               est0, d0);
  synthesis::DualDesign design;
  synthesis::RobustLqrResult k0;
  design_from_json(read_text(paths.design_json(), "explore"), design, k0);
  if (!std::filesystem::exists(paths.initial_traj_csv())) {
    throw StageDependencyError("explore requires missing artifact " +
                               paths.initial_traj_csv());
  }
  const plant::Trajectory traj0 =
      plant::read_trajectory_csv(paths.initial_traj_csv());

  RngStream rng = RngStream::derive(cfg.seed, "targeted-exploration");
  const plant::Trajectory trajT =
      synthesis::explore(cfg.system, design.K_e, design.Sigma, cfg.T_explore,
                         traj0.states.back(), rng);
  plant::write_trajectory_csv(paths.explore_traj_csv(), trajT);

  estimate::DataSet all, dataT;
  all.append(traj0);
  dataT.append(trajT);
  all.append(dataT);
  const estimate::Estimate estT = estimate::least_squares(all);
  const estimate::InfoMatrix dT = estimate::accumulate(d0, dataT);
  const synthesis::FinalController fc =
      synthesis::k_new(design.K, design.K_s, est0, estT);

  const int nx = cfg.system.nx();
  const int nu = cfg.system.nu();
  MatrixXd delta_s(nx, nx + nu);
  delta_s << estT.A_hat - est0.A_hat, estT.B_hat - est0.B_hat;
  const MatrixXd lhs = MatrixXd::Identity(nu, nu) -
                       design.K_s * (estT.B_hat - est0.B_hat);
  Eigen::JacobiSVD<MatrixXd> svd(lhs);
  const validate::Assumption2Report a2 = validate::assumption2_check(
      trajT, design, d0, cfg.T_explore, cfg.system.sigma_w, d0.c_delta);

  json j;
  j["A_T"] = matrix_to_json(estT.A_hat);
  j["B_T"] = matrix_to_json(estT.B_hat);
  j["D_T"] = matrix_to_json(dT.D.mat());
  j["sample_count"] = dT.sample_count;
  j["K_new"] = matrix_to_json(fc.K_new);
  j["delta_s_realized"] = matrix_to_json(delta_s);
  j["wellposed_sigma_min"] = svd.singularValues().minCoeff();
  j["assumption2"] = {{"discrepancy", a2.discrepancy},
                      {"dt_dominates_dbar", a2.dt_dominates_dbar},
                      {"min_eig_dt_minus_dbar", a2.min_eig_dt_minus_dbar}};
  write_text(paths.final_json(), j.dump(2));

  std::ostringstream os;
  os << "explore: T=" << cfg.T_explore
     << " steps, assumption2 discrepancy=" << a2.discrepancy
     << ", D_T dominates DbarT: " << (a2.dt_dominates_dbar ? "yes" : "no");
  return os.str();
}

std::string run_validate(const config::ScenarioConfig& cfg,
                         const std::string& out_dir) {
  StagePaths paths{out_dir};
  estimate::Estimate est0;
  estimate::InfoMatrix d0;
  estimate::estimate_from_json(read_text(paths.estimate_json(), "validate"),
                               est0, d0);
  synthesis::DualDesign design;
  synthesis::RobustLqrResult k0;
  design_from_json(read_text(paths.design_json(), "validate"), design, k0);
  const json jfinal = json::parse(read_text(paths.final_json(), "validate"));

  const lmi::GainSchedulingData gs = make_gs(cfg, est0);
  const bool certified = validate::certify_fixed(design, gs);
  validate::ValidationConfig vcfg = cfg.validation;
  vcfg.seed = cfg.seed;
  const validate::SampledPerformance sp =
      validate::sampled_performance(design, gs, vcfg);

  // Realized-run verdict against the certified sets.
  const int nx = cfg.system.nx();
  const int nu = cfg.system.nu();
  const MatrixXd delta_s =
      matrix_from_json(jfinal.at("delta_s_realized"), "delta_s_realized");
  const MatrixXd a_t = matrix_from_json(jfinal.at("A_T"), "A_T");
  const MatrixXd b_t = matrix_from_json(jfinal.at("B_T"), "B_T");
  MatrixXd delta_u(nx, nx + nu);
  delta_u << cfg.system.A - a_t, cfg.system.B - b_t;

  estimate::InfoMatrix ds_info, dbar_info;
  ds_info.D = design.Ds;
  dbar_info.D = design.DbarT;
  ds_info.sigma_w = dbar_info.sigma_w = 1.0;
  ds_info.c_delta = dbar_info.c_delta = 1.0;
  const bool s_in = validate::in_delta_set(
      delta_s, uncertainty::delta_u_bound(ds_info, nx));
  const bool u_in = validate::in_delta_set(
      delta_u, uncertainty::delta_u_bound(dbar_info, nx));
  const double wellposed_smin =
      jfinal.at("wellposed_sigma_min").get<double>();
  const MatrixXd k_new = matrix_from_json(jfinal.at("K_new"), "K_new");
  const MatrixXd a_cl = cfg.system.A + cfg.system.B * k_new;
  const MatrixXd c_cl = cfg.perf.C + cfg.perf.D * k_new;
  const std::optional<double> realized_margin =
      validate::closed_loop_perf_margin(a_cl, c_cl, cfg.perf.Dw, cfg.perf);

  std::vector<validate::ValidationRow> rows;
  for (std::size_t i = 0; i < sp.ratios.size(); ++i) {
    validate::ValidationRow r;
    r.trial = static_cast<int>(i);
    r.seed = splitmix64(cfg.seed ^ fnv1a64("sampled-performance") ^ i);
    r.delta_s_in_set = true;  // drawn from the certified sets
    r.delta_u_in_set = true;
    r.wellposed = true;
    r.perf_ok = sp.margins[i] > 0.0;
    r.worst_ratio = sp.ratios[i];
    r.discrepancy = jfinal.at("assumption2").at("discrepancy").get<double>();
    rows.push_back(r);
  }
  validate::write_validation_csv(paths.validation_csv(), rows);

  json j;
  j["certified"] = certified;
  j["sampled_performance"] = {{"samples", sp.samples},
                              {"worst_ratio", sp.worst_ratio},
                              {"worst_lmi_margin", sp.worst_lmi_margin}};
  j["realized"] = {{"delta_s_in_set", s_in},
                   {"delta_u_in_set", u_in},
                   {"wellposed", wellposed_smin > 1e-9},
                   {"perf_margin",
                    realized_margin.has_value() ? *realized_margin : -1.0},
                   {"perf_ok",
                    realized_margin.has_value() && *realized_margin > 0.0}};
  write_text(paths.validation_json(), j.dump(2));

  std::ostringstream os;
  os << "validate: certified=" << (certified ? "yes" : "no") << ", "
     << sp.samples << " sampled loops, worst ratio=" << sp.worst_ratio
     << ", worst margin=" << sp.worst_lmi_margin;
  return os.str();
}

std::string run_full(const config::ScenarioConfig& cfg,
                     const std::string& out_dir) {
  StagePaths paths{out_dir};
  std::ostringstream os;
  os << run_estimate(cfg, out_dir) << "\n";
  os << run_design(cfg, out_dir) << "\n";
  os << run_explore(cfg, out_dir) << "\n";
  os << run_validate(cfg, out_dir) << "\n";

  json report;
  report["config"] = json::parse(config::scenario_to_json(cfg));
  report["seed"] = cfg.seed;
  report["estimate"] = json::parse(read_text(paths.estimate_json(), "full"));
  report["design"] = json::parse(read_text(paths.design_json(), "full"));
  report["final"] = json::parse(read_text(paths.final_json(), "full"));
  report["validation"] =
      json::parse(read_text(paths.validation_json(), "full"));
  write_text(paths.report_json(), report.dump(2));

  os << "full: report written to " << paths.report_json();
  return os.str();
}

}  // namespace dualgs::stages
