#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualgs/plant.hpp"
#include "dualgs/synthesis.hpp"
#include "dualgs/uncertainty.hpp"

namespace dualgs::validate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ValidationConfig {
  int n_trials = 200;
  double delta = 0.1;
  int horizon = 200;
  double boundary_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Re-solves the analysis problem (X, lambda_s, lambda_u free; controller and
// uncertainty bounds fixed) — a certification path independent of the
// synthesis solve. Returns false when the analysis SDP is infeasible; throws
// CertificationFailed only when the solver cannot decide.
bool certify_fixed(const synthesis::DualDesign& design,
                   const lmi::GainSchedulingData& gs);

// Largest eps such that the frozen closed loop (A_cl, C_cl, D_cl) satisfies
// the quadratic performance sum with margin eps (the per-system KYP-style
// LMI, solved as a small SDP). Empty when no Lyapunov certificate exists.
std::optional<double> closed_loop_perf_margin(const MatrixXd& A_cl,
                                              const MatrixXd& C_cl,
                                              const MatrixXd& D_cl,
                                              const plant::PerfChannel& pc);

// Effective state feedback for a frozen scheduling shift:
// (I - Ks dB)^-1 (K + Ks dA) with Delta_s = [dA, dB].
MatrixXd effective_gain(const MatrixXd& K, const MatrixXd& Ks,
                        const MatrixXd& delta_s, int nx, int nu);

struct SampledPerformance {
  double worst_ratio = 0.0;        // worst simulated s_wz / s_ww
  double worst_lmi_margin = 0.0;   // smallest per-sample certified eps
  int samples = 0;
  std::vector<double> ratios;      // per-sample energy ratios
  std::vector<double> margins;     // per-sample certified eps values
};

// Samples (Delta_s, Delta_u) from the design's certified ellipsoids
// (boundary draws included), forms the frozen closed loop, and checks the
// per-sample performance LMI (primary) plus a simulated L2-disturbance
// energy ratio (secondary). Throws PerformanceViolation with the offending
// triple serialized as JSON when a sample fails the LMI.
SampledPerformance sampled_performance(const synthesis::DualDesign& design,
                                       const lmi::GainSchedulingData& gs,
                                       const ValidationConfig& cfg);

// Like sampled_performance but with the uncertainty ellipsoid inflated by
// `inflation` (a falsification probe; inflation > 1 leaves the certified set).
SampledPerformance sampled_performance_inflated(
    const synthesis::DualDesign& design, const lmi::GainSchedulingData& gs,
    const ValidationConfig& cfg, double inflation);

struct CoverageConfig {
  int n_trials = 500;
  double delta = 0.1;
  int n0 = 200;
  int T_explore = 200;
  double input_std = 1.0;
  std::vector<double> eps_grid = {0.25, 1.0, 4.0};
  std::uint64_t seed = 0;
};

struct CoverageStats {
  int n_trials = 0;
  double cov_theta0 = 0.0;   // truth in Theta after the initial phase
  double cov_thetaT = 0.0;   // truth in Theta after both phases
  double cov_joint = 0.0;    // both events at once
  double cov_delta_s = 0.0;  // Delta_s containment for every grid eps
  std::vector<double> cov_delta_s_per_eps;
};

// Monte Carlo coverage of the credibility region and of the Young-bound
// scheduling set, with two random-excitation phases per trial.
CoverageStats coverage_test(const plant::LtiSystem& true_sys,
                            const CoverageConfig& cfg);

struct Assumption2Report {
  double discrepancy = 0.0;        // relative Frobenius mismatch
  bool dt_dominates_dbar = false;  // realized D_T >= DbarT in the PSD order
  double min_eig_dt_minus_dbar = 0.0;
};

// A-posteriori check of the empirical-covariance approximation: compares
// sum [x;u][x;u]' against T * [[W_e, W_e K_e'], [K_e W_e, K_e W_e K_e' + S]]
// and the realized information matrix against the design's DbarT.
Assumption2Report assumption2_check(const plant::Trajectory& traj,
                                    const synthesis::DualDesign& design,
                                    const estimate::InfoMatrix& D0, int T,
                                    double sigma_w, double c_delta);

struct Theorem1Check {
  bool delta_s_in_set = false;
  bool delta_u_in_set = false;
  bool wellposed = false;
  bool perf_ok = false;
  bool joint() const {
    return delta_s_in_set && delta_u_in_set && wellposed && perf_ok;
  }
};

// End-to-end per-run verdict for the closed-loop guarantee: realized
// (Delta_s, Delta_u) inside the certified sets, K_new well-posed, and the
// realized closed loop passing the per-system performance LMI.
Theorem1Check check_theorem1(const synthesis::RunReport& report,
                             const plant::LtiSystem& true_sys,
                             const plant::PerfChannel& pc);

// Delta' Delta <= P within tolerance 1e-9.
bool in_delta_set(const MatrixXd& delta, const uncertainty::DeltaBound& bound);

// Validation summary CSV: trial id, seed, coverage flags, worst ratio,
// discrepancy.
struct ValidationRow {
  int trial = 0;
  std::uint64_t seed = 0;
  bool delta_s_in_set = false;
  bool delta_u_in_set = false;
  bool wellposed = false;
  bool perf_ok = false;
  double worst_ratio = 0.0;
  double discrepancy = 0.0;
};
void write_validation_csv(const std::string& path,
                          const std::vector<ValidationRow>& rows);

}  // namespace dualgs::validate
