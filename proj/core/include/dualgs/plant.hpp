#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dualgs/errors.hpp"
#include "dualgs/matrix_kit.hpp"
#include "dualgs/rng.hpp"

namespace dualgs::plant {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// x_{k+1} = A x_k + B u_k + w_k, w_k ~ N(0, sigma_w^2 I). The true (A, B)
// live only inside the simulator; everything downstream sees estimates.
struct LtiSystem {
  MatrixXd A;
  MatrixXd B;
  double sigma_w = 0.0;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
  void validate() const;
};

// Performance channel z = C x + D u + D_w w with the quadratic-performance
// weights (Q_p, S_p, R_p), R_p > 0.
struct PerfChannel {
  MatrixXd C;
  MatrixXd D;
  MatrixXd Dw;
  MatrixXd Qp;
  MatrixXd Sp;
  MatrixXd Rp;

  int nz() const { return static_cast<int>(C.rows()); }
  void validate(int nx, int nu) const;

  // L2-gain shorthand: S_p = 0, R_p = I/gamma, Q_p = -gamma*I, with z = x
  // unless (C, D, Dw) are supplied.
  static PerfChannel l2_gain(double gamma, int nx, int nu);
  static PerfChannel l2_gain(double gamma, const MatrixXd& C, const MatrixXd& D,
                             const MatrixXd& Dw);
};

struct Trajectory {
  std::vector<VectorXd> states;        // length horizon + 1
  std::vector<VectorXd> inputs;        // length horizon
  std::vector<VectorXd> noises;        // length horizon
  std::vector<VectorXd> perf_outputs;  // empty until filled with a channel

  int horizon() const { return static_cast<int>(inputs.size()); }
};

// u_k = K x_k + e_k with e_k ~ N(0, Sigma); Sigma = 0 gives pure feedback.
struct Policy {
  MatrixXd K;
  MatrixXd Sigma;

  static Policy feedback(const MatrixXd& K);
};

// Simulate `horizon` steps from x0. Draw order per step: excitation e_k
// (nu normals), then process noise w_k (nx normals); both are always drawn so
// the stream stays aligned regardless of Sigma.
Trajectory simulate(const LtiSystem& sys, const Policy& policy,
                    const VectorXd& x0, int horizon, RngStream& rng);

// Same dynamics with an externally chosen disturbance sequence (used by the
// validation module to inject L2 signals).
Trajectory simulate_with_noise(const LtiSystem& sys, const Policy& policy,
                               const VectorXd& x0,
                               const std::vector<VectorXd>& noises,
                               RngStream* excitation_rng = nullptr);

VectorXd perf_output(const PerfChannel& pc, const VectorXd& x,
                     const VectorXd& u, const VectorXd& w);

// Computes z_k for every step of the trajectory.
void fill_perf_outputs(const PerfChannel& pc, Trajectory& traj);

// Left-hand side pieces of the quadratic performance sum:
//   s_wz = sum_k [w;z]' [[Qp, Sp],[Sp', Rp]] [w;z],   s_ww = sum_k w'w.
// The caller checks s_wz <= -eps * s_ww.
struct QuadPerfSums {
  double s_wz = 0.0;
  double s_ww = 0.0;
};
QuadPerfSums quad_perf_lhs(const PerfChannel& pc, const Trajectory& traj);

// max over trajectories of sqrt(sum ||z||^2 / sum ||w||^2). Throws
// ZeroDisturbance when no trajectory carries disturbance energy.
double empirical_l2_gain(const PerfChannel& pc,
                         const std::vector<Trajectory>& trajectories);

// CSV export: columns k, x[...], u[...], w[...], z[...]. The final row holds
// the terminal state with empty input/noise/output cells.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// Inverse of write_trajectory_csv (%.17g cells round-trip exactly).
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace dualgs::plant
