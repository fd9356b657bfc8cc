#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dualgs/errors.hpp"
#include "dualgs/matrix_kit.hpp"
#include "dualgs/plant.hpp"

namespace dualgs::estimate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Least-squares point estimate of the dynamics.
struct Estimate {
  MatrixXd A_hat;
  MatrixXd B_hat;
};

// Data-information matrix D = (sigma_w^2 c_delta)^-1 * sum [x;u][x;u]',
// additive over disjoint data sets. D defines the credibility region
// {E' D E <= I} for the stacked estimation error.
struct InfoMatrix {
  matkit::SymMatrix D;
  double c_delta = 0.0;
  double sigma_w = 0.0;
  int sample_count = 0;
};

// Regression samples (x_k, u_k) -> x_{k+1}, flattened from one or more
// trajectories.
struct DataSet {
  std::vector<VectorXd> x;
  std::vector<VectorXd> u;
  std::vector<VectorXd> x_next;

  int size() const { return static_cast<int>(x.size()); }
  void append(const plant::Trajectory& traj);
  void append(const DataSet& other);
};

// argmin_{A,B} sum ||x_{k+1} - A x_k - B u_k||^2 via column-pivoted QR of the
// regressor matrix. Throws RankDeficient if the regressors do not span
// (persistency of excitation failed or too few samples).
Estimate least_squares(const DataSet& data);

// (1-delta)-quantile of the chi-square distribution with `dof` degrees of
// freedom, by Newton/bisection inversion of the regularized incomplete gamma
// function to |CDF(q) - (1-delta)| < 1e-10.
double chi2_quantile(int dof, double delta);

InfoMatrix info_matrix(const DataSet& data, double sigma_w, double c_delta);

// Adds the samples of `extra` onto an existing information matrix (the D_T
// accumulation onto D_0).
InfoMatrix accumulate(const InfoMatrix& base, const DataSet& extra);

// Membership test for the credibility region: the stacked error
// E = [(A_hat - A)', (B_hat - B)']' of size (nx+nu) x nx satisfies
// E' D E <= I within tolerance 1e-9 (boundary included).
bool in_credibility_region(const MatrixXd& cand_A, const MatrixXd& cand_B,
                           const Estimate& est, const InfoMatrix& info);

// JSON (de)serialization: matrices as row-major arrays with explicit dims.
std::string estimate_to_json(const Estimate& est, const InfoMatrix& info);
void estimate_from_json(const std::string& text, Estimate& est,
                        InfoMatrix& info);

}  // namespace dualgs::estimate
