#pragma once

#include <Eigen/Dense>

#include "dualgs/estimate.hpp"
#include "dualgs/matrix_kit.hpp"
#include "dualgs/plant.hpp"
#include "dualgs/sdp.hpp"

namespace dualgs::lmi {

using Eigen::MatrixXd;
using sdp::AffineMat;

struct Dims {
  int nx = 0;
  int nu = 0;
  int nz = 0;
};

// Open-loop LPV data for the gain-scheduling synthesis: initial estimates,
// performance channel, and dimensions. The scheduling channel carries
// z^s = [x; u] (width nx+nu) with w^s = Delta_s z^s of width nx, so the
// scheduling feedthrough gain K_s is nu x nx.
struct GainSchedulingData {
  MatrixXd A0;
  MatrixXd B0;
  plant::PerfChannel perf;
  Dims dims;

  void validate() const;
};

// Data for the robust-LQR exploration inequalities: initial estimates, the
// initial information matrix, and the exploration cost weights Q >= 0, R > 0.
struct ExplorationData {
  MatrixXd A0;
  MatrixXd B0;
  estimate::InfoMatrix D0;
  MatrixXd Q;
  MatrixXd R;

  void validate() const;
};

// Every builder takes affine expressions for the decision quantities, so the
// synthesis (variable) and validation (numeric) forms share one assembly
// path: pass program variables for the former, AffineMat::constant for the
// latter, and evaluate.

// Cost block [[Y, [Q^1/2 W; R^1/2 Z']], [*, W]] >= 0; trace(Y) bounds the
// LQR cost tr(Q W) + tr(R K W K') through the Schur complement.
AffineMat s1_block(const AffineMat& W, const AffineMat& Y, const AffineMat& Z,
                   const MatrixXd& Q, const MatrixXd& R);

// Robust covariance block
//   [[H_e, F_e, G_e], [F_e', C_e - t_e I, 0], [G_e', 0, t_e D0]] >= 0
// with H_e = diag(W_e, Sigma), F_e = [W_e A0' + Z_e B0'; Sigma B0'],
// G_e = [[-W_e, -Z_e], [0, -Sigma]], C_e = W_e - sigma_w^2 I. The scalar
// t_e > 0 is a fixed hyperparameter (it enters bilinearly).
AffineMat se_block(double t_e, const AffineMat& Z_e, const AffineMat& W_e,
                   const AffineMat& Sigma, const MatrixXd& D0,
                   const MatrixXd& A0, const MatrixXd& B0, double sigma_w);

// The 8x8-block gain-scheduling synthesis matrix (to be constrained < 0),
// with Q_s = Q_u = -I; lambda_s, lambda_u fixed. Ds and DbarT enter the
// lower-right blocks as -(1/lambda_s) Ds and -(1/lambda_u) DbarT, i.e. the
// inverses R_s^-1, R_u^-1 of the uncertainty-set shapes are the decision
// quantities.
AffineMat s2_gain_sched(const AffineMat& Ks, const AffineMat& M,
                        const AffineMat& N, double lambda_s, double lambda_u,
                        const AffineMat& Ds, const AffineMat& DbarT,
                        const GainSchedulingData& gs);

// [[eps D0 - (1+eps) Ds, eps D0], [eps D0, DbarT + eps D0]] (to be > 0);
// equivalent by Woodbury + Schur to Ds^-1 > (1+1/eps) D0^-1 + (1+eps) DbarT^-1.
AffineMat s3_block(double eps, const MatrixXd& D0, const AffineMat& DbarT,
                   const AffineMat& Ds);

// Predicted-information constraint (to be > 0):
//   (T / (sigma_w^2 c_delta)) [[W_e, Z_e], [Z_e', Z_e'K0' + K0 Z_e
//       - K0 W_e K0' + Sigma]] + D0 - DbarT
// using the affine lower bound of Z_e' W_e^-1 Z_e at V = [I K0'].
AffineMat dbar_constraint(const AffineMat& W_e, const AffineMat& Z_e,
                          const AffineMat& Sigma, const AffineMat& DbarT,
                          const MatrixXd& K0, const MatrixXd& D0, double T,
                          double sigma_w, double c_delta);

// Closed-loop analysis quadratic form (to be constrained < 0 with X > 0):
// the multiplier-weighted outer product of the closed-loop LPV rows, with
// R_s = Ds^-1 and R_u = DbarT^-1 fixed numerics. X, lambda_s, lambda_u may be
// expressions (analysis SDP) or constants (pointwise check).
AffineMat analysis_lmi(const AffineMat& X, const AffineMat& lambda_s,
                       const AffineMat& lambda_u, const MatrixXd& K,
                       const MatrixXd& Ks, const matkit::SymMatrix& Ds,
                       const matkit::SymMatrix& DbarT,
                       const GainSchedulingData& gs);

// Numeric form of the analysis quadratic form; the caller tests < 0.
matkit::SymMatrix analysis_lmi_fixed(const MatrixXd& K, const MatrixXd& Ks,
                                     const matkit::SymMatrix& X,
                                     double lambda_s, double lambda_u,
                                     const matkit::SymMatrix& Ds,
                                     const matkit::SymMatrix& DbarT,
                                     const GainSchedulingData& gs);

// Closed-loop LPV rows (shared by synthesis, analysis, and validation):
//   [x+; z^s; z^u; z] = [A_cl; Cs_cl; Cu_cl; Cz_cl] [x; w^s; w^u; w].
struct ClosedLoopRows {
  MatrixXd A_cl;   // nx x 4nx
  MatrixXd Cs_cl;  // (nx+nu) x 4nx
  MatrixXd Cu_cl;  // (nx+nu) x 4nx
  MatrixXd Cz_cl;  // nz x 4nx
};
ClosedLoopRows closed_loop_rows(const MatrixXd& K, const MatrixXd& Ks,
                                const GainSchedulingData& gs);

}  // namespace dualgs::lmi
