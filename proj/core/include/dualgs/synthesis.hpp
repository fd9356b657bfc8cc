#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "dualgs/estimate.hpp"
#include "dualgs/lmi_blocks.hpp"
#include "dualgs/plant.hpp"
#include "dualgs/sdp.hpp"

namespace dualgs::synthesis {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Fixed hyperparameters of one inner SDP solve; the paper's line search runs
// over grids of these.
struct Hyperparams {
  double eps = 1.0;
  double t_e = 0.0;
  double lambda_s = 1.0;
  double lambda_u = 1.0;
};

struct HyperGrids {
  std::vector<double> eps;
  std::vector<double> t_e;
  std::vector<double> lambda_s;
  std::vector<double> lambda_u;
};

// Full output of the combined dual SDP plus recovered gains.
struct DualDesign {
  MatrixXd K_e;              // exploration gain Z_e' W_e^-1
  matkit::SymMatrix Sigma;   // exploration excitation covariance (PSD-projected)
  MatrixXd K;                // scheduled base gain M N^-1
  MatrixXd K_s;              // scheduling feedthrough
  matkit::SymMatrix N;
  MatrixXd M;
  matkit::SymMatrix DbarT;   // guaranteed lower bound on D_T
  matkit::SymMatrix Ds;      // scheduling-set shape (R_s^-1)
  matkit::SymMatrix W_e;     // worst-case exploration state covariance
  MatrixXd Z_e;
  double exploration_cost = 0.0;  // tr(Y_e)
  Hyperparams hyper;
};

struct FinalController {
  MatrixXd K_new;
  estimate::Estimate estimates_T;
};

struct GridPointStatus {
  Hyperparams hyper;
  sdp::SolverStatus status = sdp::SolverStatus::NumericalFailure;
  double objective = 0.0;
  int iterations = 0;
};

struct RobustLqrResult {
  MatrixXd K0;
  double cost = 0.0;
  double t_e = 0.0;
  matkit::SymMatrix W_e;
  MatrixXd Z_e;
};

// Robust LQR for the initial candidate gain: min tr(Y_e) over (W_e, Z_e, Y_e)
// s.t. S1 >= 0 and S_e >= 0, with Sigma fixed to 1e-3 sigma_w^2 I (the
// excitation covariance is not a decision quantity in this pre-step).
RobustLqrResult robust_lqr_K0(const lmi::ExplorationData& ed, double t_e);

// Line search over t_e; keeps the feasible point of least cost.
RobustLqrResult robust_lqr_K0_search(const lmi::ExplorationData& ed,
                                     const std::vector<double>& te_grid);

// The combined exploration + gain-scheduling SDP for fixed hyperparameters:
// variables {W_e, Z_e, Y_e, Sigma, Ks, M, N, DbarT, Ds}, objective tr(Y_e),
// constraints S1 >= 0, Se >= 0, S2 < 0, S3 > 0, and the DbarT bound > 0.
sdp::ConicProgram build_dual_sdp(const lmi::GainSchedulingData& gs,
                                 const lmi::ExplorationData& ed,
                                 double T_explore, const MatrixXd& K0,
                                 const Hyperparams& hyper);

// Converts an Optimal report of build_dual_sdp into a DualDesign.
DualDesign design_from_assignment(
    const std::map<std::string, MatrixXd>& assignment, double objective,
    const Hyperparams& hyper);

struct LineSearchResult {
  DualDesign best;
  std::vector<GridPointStatus> statuses;
};

// Solves the SDP on every grid point (optionally in parallel; results do not
// depend on the schedule) and returns the feasible design of least cost.
// Throws AllInfeasible when no grid point is feasible.
LineSearchResult line_search(const lmi::GainSchedulingData& gs,
                             const lmi::ExplorationData& ed, double T_explore,
                             const MatrixXd& K0, const HyperGrids& grids,
                             int jobs = 1);

// K_e = Z_e' W_e^-1 and K = M N^-1.
std::pair<MatrixXd, MatrixXd> recover_controllers(const matkit::SymMatrix& W_e,
                                                  const MatrixXd& Z_e,
                                                  const matkit::SymMatrix& N,
                                                  const MatrixXd& M);

// Targeted exploration u_k = K_e x_k + e_k, e_k ~ N(0, Sigma), continuing
// from the supplied state.
plant::Trajectory explore(const plant::LtiSystem& sys, const MatrixXd& K_e,
                          const matkit::SymMatrix& Sigma, int T_explore,
                          const VectorXd& x_start, RngStream& rng);

// Explicit state feedback K_new = (I - K_s(B_T - B_0))^-1 (K + K_s(A_T - A_0));
// verifies the implicit-law fixed point and throws IllPosedController when
// I - K_s(B_T - B_0) is singular beyond tolerance.
FinalController k_new(const MatrixXd& K, const MatrixXd& Ks,
                      const estimate::Estimate& est0,
                      const estimate::Estimate& estT);

// Everything run_algorithm1 needs; built from the scenario configuration.
struct PipelineConfig {
  double delta = 0.1;
  int n0 = 200;
  int T_explore = 1000;
  double initial_input_std = 1.0;
  plant::PerfChannel perf;
  MatrixXd Q;  // exploration cost weights
  MatrixXd R;
  HyperGrids grids;
  std::vector<double> k0_te_grid;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct RunReport {
  std::uint64_t seed = 0;
  double c_delta = 0.0;
  estimate::Estimate est0;
  estimate::InfoMatrix D0;
  plant::Trajectory initial_traj;
  RobustLqrResult k0;
  DualDesign design;
  std::vector<GridPointStatus> statuses;
  plant::Trajectory explore_traj;
  estimate::Estimate estT;
  estimate::InfoMatrix DT;
  FinalController final_ctrl;
  MatrixXd delta_s_realized;  // [A_T - A_0, B_T - B_0]
  double wellposed_sigma_min = 0.0;
};

// The full dual-control pipeline: random initial exploration, least squares
// and D_0, robust LQR K_0, line-searched combined SDP, targeted exploration,
// re-estimation, and the final gain. Stage failures are rethrown with a
// stage label; the error family is preserved.
RunReport run_algorithm1(const PipelineConfig& cfg,
                         const plant::LtiSystem& true_sys);

}  // namespace dualgs::synthesis
