#pragma once

#include <Eigen/Dense>

#include "dualgs/errors.hpp"
#include "dualgs/estimate.hpp"
#include "dualgs/matrix_kit.hpp"
#include "dualgs/rng.hpp"

namespace dualgs::uncertainty {

using Eigen::MatrixXd;

// Ellipsoidal bound Delta' Delta <= P for an nx x (nx+nu) block Delta.
struct DeltaBound {
  matkit::SymMatrix P;
  int rows = 0;  // row count of Delta (nx)

  int cols() const { return P.dim(); }
};

// Bound for the residual uncertainty after exploration: P = D_T^-1. Passing
// the initial information matrix gives the Delta_0 bound P = D_0^-1.
DeltaBound delta_u_bound(const estimate::InfoMatrix& info_T, int nx);

// Young-inequality bound for the scheduling block:
// P = (1 + 1/eps) D_0^-1 + (1 + eps) D_T^-1.
DeltaBound delta_s_bound(double eps, const estimate::InfoMatrix& D0,
                         const estimate::InfoMatrix& DT, int nx);

// Numeric S3 block [[eps*D0 - (1+eps)*Ds, eps*D0], [eps*D0, DbarT + eps*D0]].
// Positive definiteness is equivalent (Woodbury + Schur) to
// Ds^-1 > (1 + 1/eps) D0^-1 + (1 + eps) DbarT^-1.
matkit::SymMatrix ds_feasibility_block(double eps, const matkit::SymMatrix& D0,
                                       const matkit::SymMatrix& DbarT,
                                       const matkit::SymMatrix& Ds);

// Draws Delta = U * S * P^(1/2) with orthonormal-row U and diagonal
// S = diag(s_i), s_i in [0, 1]; with probability boundary_fraction all
// s_i = 1. Always satisfies Delta' Delta <= P within 1e-9.
MatrixXd sample_delta(const DeltaBound& bound, RngStream& rng,
                      double boundary_fraction);

}  // namespace dualgs::uncertainty
