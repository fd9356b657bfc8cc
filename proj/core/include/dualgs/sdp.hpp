#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "dualgs/errors.hpp"

namespace dualgs::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class VarStructure { Symmetric, Rectangular, Scalar };

struct VarHandle {
  int id = -1;
};

struct VarInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  VarStructure structure = VarStructure::Rectangular;
  int offset = 0;       // first scalar index
  int scalar_size = 0;  // symmetric: n(n+1)/2, rectangular: r*c, scalar: 1
};

// Matrix-valued expression that is affine in the program's scalar decision
// variables: constant + sum_k x_k * coeff_k. All LMI builders produce these;
// evaluating one at a numeric assignment yields the concrete matrix, which is
// how the variable and numeric forms of each builder share one assembly path.
class AffineMat {
 public:
  AffineMat() = default;
  static AffineMat constant(const MatrixXd& m);
  static AffineMat zero(int rows, int cols);
  static AffineMat identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const MatrixXd& constant_term() const { return constant_; }
  const std::map<int, MatrixXd>& coeffs() const { return coeffs_; }
  bool is_constant() const { return coeffs_.empty(); }

  AffineMat transpose() const;
  AffineMat scaled(double a) const;
  AffineMat left_mul(const MatrixXd& c) const;   // c * expr
  AffineMat right_mul(const MatrixXd& c) const;  // expr * c
  // 0.5 * (expr + expr'): usable only for square expressions.
  AffineMat sym() const;

  MatrixXd evaluate(const VectorXd& x) const;

  friend AffineMat operator+(const AffineMat& a, const AffineMat& b);
  friend AffineMat operator-(const AffineMat& a, const AffineMat& b);
  friend AffineMat operator*(double a, const AffineMat& b) { return b.scaled(a); }

 private:
  friend class ConicProgram;
  friend AffineMat affine_block(const std::vector<std::vector<AffineMat>>&);
  friend AffineMat scalar_expand(const AffineMat& s, const MatrixXd& m);

  int rows_ = 0, cols_ = 0;
  MatrixXd constant_;
  std::map<int, MatrixXd> coeffs_;
};

// Block assembly over affine expressions; every cell must already have the
// right shape (use AffineMat::zero for empty cells).
AffineMat affine_block(const std::vector<std::vector<AffineMat>>& grid);

// s * m for a 1x1 affine expression s and a constant matrix m.
AffineMat scalar_expand(const AffineMat& s, const MatrixXd& m);

enum class Sense { Geq, Leq };

struct Constraint {
  AffineMat expr;
  Sense sense = Sense::Geq;
  double margin = 0.0;  // Geq: expr >= margin*I; Leq: expr <= -margin*I
  std::string name;
};

enum class SolverStatus { Optimal, Infeasible, NumericalFailure };

struct SolverReport {
  SolverStatus status = SolverStatus::NumericalFailure;
  std::map<std::string, MatrixXd> assignment;
  double objective_value = 0.0;
  double max_violation = 0.0;
  int iterations = 0;
  std::string message;
};

// Solver-agnostic SDP: matrix decision variables, affine LMI constraints,
// linear (trace-based) objective. The backing interior-point solver is hidden
// behind solve(); nothing solver-specific appears in this interface.
class ConicProgram {
 public:
  VarHandle add_symmetric(const std::string& name, int n);
  VarHandle add_rectangular(const std::string& name, int rows, int cols);
  VarHandle add_scalar(const std::string& name);

  // Affine expression standing for a declared variable.
  AffineMat var(VarHandle h) const;

  void add_geq(const AffineMat& expr, const std::string& name,
               double margin = 0.0);
  void add_leq(const AffineMat& expr, const std::string& name,
               double margin = 0.0);

  // Margin for strict inequalities: 1e-7 * (1 + ||constant term||_F).
  static double strict_margin(const AffineMat& expr);

  // Minimize trace(expr) for a square affine expression.
  void set_objective_trace(const AffineMat& expr);

  int scalar_dim() const { return scalar_dim_; }
  const std::vector<VarInfo>& variables() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const VectorXd& objective() const { return objective_; }
  double objective_constant() const { return objective_constant_; }

  VectorXd pack(const std::map<std::string, MatrixXd>& assignment) const;
  std::map<std::string, MatrixXd> unpack(const VectorXd& x) const;

  // Debug dump of the standard-form problem (variable dims, constraint
  // matrices in coordinate format) for cross-solver reproduction.
  std::string dump_standard_form_json() const;

 private:
  VarHandle add_var(const std::string& name, int rows, int cols,
                    VarStructure structure);

  std::vector<VarInfo> vars_;
  std::vector<Constraint> constraints_;
  VectorXd objective_;  // resized lazily to scalar_dim_
  double objective_constant_ = 0.0;
  int scalar_dim_ = 0;
};

// Solves the program. On Optimal the assignment is re-verified by the
// certificate checker (eigenvalue margins, independent of the solver path);
// a certified violation above 10*tol downgrades the status.
SolverReport solve(const ConicProgram& p, double tol = 1e-8);

// Worst eigenvalue violation of `assignment` across all constraints
// (0 if satisfied). Throws MissingVariable if a declared variable is absent.
double check_assignment(const ConicProgram& p,
                        const std::map<std::string, MatrixXd>& assignment);

}  // namespace dualgs::sdp
