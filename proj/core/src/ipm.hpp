#pragma once

// Private backend for sdp::solve: a dense primal-dual interior-point method
// in the LMI (dual) standard form
//     min c'x   s.t.   F0_j + sum_k x_k F_jk  >= 0   for every block j,
// with Nesterov-Todd scaling and a Mehrotra-style adaptive centering
// parameter. Problems here are tiny (blocks <= ~30, a few dozen scalars), so
// everything is dense Eigen.

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "dualgs/sdp.hpp"

namespace dualgs::detail {

struct LmiBlock {
  Eigen::MatrixXd F0;
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;  // (scalar index, F_k)
};

struct IpmOptions {
  double tol = 1e-8;
  int max_iters = 200;
  double step_fraction = 0.98;
  bool trace = false;  // per-iteration diagnostics on stderr
};

struct IpmResult {
  sdp::SolverStatus status = sdp::SolverStatus::NumericalFailure;
  Eigen::VectorXd x;
  int iterations = 0;
  std::string message;
};

IpmResult solve_lmi_ipm(const std::vector<LmiBlock>& blocks,
                        const Eigen::VectorXd& c, int m,
                        const IpmOptions& opts);

}  // namespace dualgs::detail
