#include "dualgs/sdp.hpp"

#include <cmath>
#include <cstdlib>

#include "ipm.hpp"
#include "json_util.hpp"

namespace dualgs::sdp {

AffineMat AffineMat::constant(const MatrixXd& m) {
  AffineMat e;
  e.rows_ = static_cast<int>(m.rows());
  e.cols_ = static_cast<int>(m.cols());
  e.constant_ = m;
  return e;
}

AffineMat AffineMat::zero(int rows, int cols) {
  return constant(MatrixXd::Zero(rows, cols));
}

AffineMat AffineMat::identity(int n) {
  return constant(MatrixXd::Identity(n, n));
}

AffineMat AffineMat::transpose() const {
  AffineMat e;
  e.rows_ = cols_;
  e.cols_ = rows_;
  e.constant_ = constant_.transpose();
  for (const auto& [k, m] : coeffs_) e.coeffs_[k] = m.transpose();
  return e;
}

AffineMat AffineMat::scaled(double a) const {
  AffineMat e = *this;
  e.constant_ *= a;
  for (auto& [k, m] : e.coeffs_) m *= a;
  return e;
}

AffineMat AffineMat::left_mul(const MatrixXd& c) const {
  if (c.cols() != rows_) throw ShapeMismatch("AffineMat::left_mul");
  AffineMat e;
  e.rows_ = static_cast<int>(c.rows());
  e.cols_ = cols_;
  e.constant_ = c * constant_;
  for (const auto& [k, m] : coeffs_) e.coeffs_[k] = c * m;
  return e;
}

AffineMat AffineMat::right_mul(const MatrixXd& c) const {
  if (c.rows() != cols_) throw ShapeMismatch("AffineMat::right_mul");
  AffineMat e;
  e.rows_ = rows_;
  e.cols_ = static_cast<int>(c.cols());
  e.constant_ = constant_ * c;
  for (const auto& [k, m] : coeffs_) e.coeffs_[k] = m * c;
  return e;
}

AffineMat AffineMat::sym() const {
  if (rows_ != cols_) throw ShapeMismatch("AffineMat::sym on non-square");
  AffineMat t = transpose();
  AffineMat sum = *this + t;
  return sum.scaled(0.5);
}

MatrixXd AffineMat::evaluate(const VectorXd& x) const {
  MatrixXd out = constant_;
  for (const auto& [k, m] : coeffs_) {
    if (k >= x.size()) throw MissingVariable("assignment too short");
    out += x(k) * m;
  }
  return out;
}

AffineMat operator+(const AffineMat& a, const AffineMat& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_) {
    throw ShapeMismatch("AffineMat addition shape mismatch");
  }
  AffineMat e = a;
  e.constant_ += b.constant_;
  for (const auto& [k, m] : b.coeffs_) {
    auto it = e.coeffs_.find(k);
    if (it == e.coeffs_.end()) {
      e.coeffs_[k] = m;
    } else {
      it->second += m;
    }
  }
  return e;
}

AffineMat operator-(const AffineMat& a, const AffineMat& b) {
  return a + b.scaled(-1.0);
}

AffineMat scalar_expand(const AffineMat& s, const MatrixXd& m) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw ShapeMismatch("scalar_expand needs a 1x1 expression");
  }
  AffineMat e;
  e.rows_ = static_cast<int>(m.rows());
  e.cols_ = static_cast<int>(m.cols());
  e.constant_ = s.constant_term()(0, 0) * m;
  for (const auto& [k, coeff] : s.coeffs()) e.coeffs_[k] = coeff(0, 0) * m;
  return e;
}

AffineMat affine_block(const std::vector<std::vector<AffineMat>>& grid) {
  if (grid.empty() || grid[0].empty()) throw ShapeMismatch("empty block grid");
  const std::size_t ncols = grid[0].size();
  int total_rows = 0, total_cols = 0;
  for (std::size_t j = 0; j < ncols; ++j) total_cols += grid[0][j].cols();
  for (const auto& row : grid) {
    if (row.size() != ncols) throw ShapeMismatch("ragged block grid");
    total_rows += row[0].rows();
  }

  AffineMat out = AffineMat::zero(total_rows, total_cols);
  int r0 = 0;
  for (const auto& row : grid) {
    const int rh = row[0].rows();
    int c0 = 0;
    for (const AffineMat& cell : row) {
      if (cell.rows() != rh) {
        throw ShapeMismatch("block row height mismatch in affine_block");
      }
      out.constant_.block(r0, c0, rh, cell.cols()) = cell.constant_term();
      for (const auto& [k, m] : cell.coeffs()) {
        auto it = out.coeffs_.find(k);
        if (it == out.coeffs_.end()) {
          it = out.coeffs_.emplace(k, MatrixXd::Zero(total_rows, total_cols))
                   .first;
        }
        it->second.block(r0, c0, rh, cell.cols()) += m;
      }
      c0 += cell.cols();
    }
    if (c0 != total_cols) throw ShapeMismatch("block row width mismatch");
    r0 += rh;
  }
  return out;
}

VarHandle ConicProgram::add_var(const std::string& name, int rows, int cols,
                                VarStructure structure) {
  for (const VarInfo& v : vars_) {
    if (v.name == name) throw DomainError("duplicate variable name: " + name);
  }
  VarInfo v;
  v.name = name;
  v.rows = rows;
  v.cols = cols;
  v.structure = structure;
  v.offset = scalar_dim_;
  switch (structure) {
    case VarStructure::Symmetric: v.scalar_size = rows * (rows + 1) / 2; break;
    case VarStructure::Rectangular: v.scalar_size = rows * cols; break;
    case VarStructure::Scalar: v.scalar_size = 1; break;
  }
  scalar_dim_ += v.scalar_size;
  vars_.push_back(v);
  return VarHandle{static_cast<int>(vars_.size()) - 1};
}

VarHandle ConicProgram::add_symmetric(const std::string& name, int n) {
  if (n < 1) throw DomainError("add_symmetric: dim must be >= 1");
  return add_var(name, n, n, VarStructure::Symmetric);
}

VarHandle ConicProgram::add_rectangular(const std::string& name, int rows,
                                        int cols) {
  if (rows < 1 || cols < 1) throw DomainError("add_rectangular: bad shape");
  return add_var(name, rows, cols, VarStructure::Rectangular);
}

VarHandle ConicProgram::add_scalar(const std::string& name) {
  return add_var(name, 1, 1, VarStructure::Scalar);
}

namespace {

// Column-major lower-triangle index for a symmetric variable.
int tri_index(int i, int j, int n) {
  // requires i >= j
  return j * n - j * (j - 1) / 2 + (i - j);
}

}  // namespace

AffineMat ConicProgram::var(VarHandle h) const {
  if (h.id < 0 || h.id >= static_cast<int>(vars_.size())) {
    throw MissingVariable("bad variable handle");
  }
  const VarInfo& v = vars_[h.id];
  AffineMat e = AffineMat::zero(v.rows, v.cols);
  if (v.structure == VarStructure::Symmetric) {
    for (int j = 0; j < v.cols; ++j) {
      for (int i = j; i < v.rows; ++i) {
        MatrixXd basis = MatrixXd::Zero(v.rows, v.cols);
        basis(i, j) = 1.0;
        basis(j, i) = 1.0;
        if (i == j) basis(i, j) = 1.0;
        e.coeffs_[v.offset + tri_index(i, j, v.rows)] = basis;
      }
    }
  } else {
    int k = 0;
    for (int j = 0; j < v.cols; ++j) {
      for (int i = 0; i < v.rows; ++i) {
        MatrixXd basis = MatrixXd::Zero(v.rows, v.cols);
        basis(i, j) = 1.0;
        e.coeffs_[v.offset + k] = basis;
        ++k;
      }
    }
  }
  return e;
}

void ConicProgram::add_geq(const AffineMat& expr, const std::string& name,
                           double margin) {
  if (expr.rows() != expr.cols()) {
    throw ShapeMismatch("constraint expression must be square: " + name);
  }
  constraints_.push_back({expr, Sense::Geq, margin, name});
}

void ConicProgram::add_leq(const AffineMat& expr, const std::string& name,
                           double margin) {
  if (expr.rows() != expr.cols()) {
    throw ShapeMismatch("constraint expression must be square: " + name);
  }
  constraints_.push_back({expr, Sense::Leq, margin, name});
}

double ConicProgram::strict_margin(const AffineMat& expr) {
  return 1e-7 * (1.0 + expr.constant_term().norm());
}

void ConicProgram::set_objective_trace(const AffineMat& expr) {
  if (expr.rows() != expr.cols()) {
    throw ShapeMismatch("objective expression must be square");
  }
  objective_ = VectorXd::Zero(scalar_dim_);
  objective_constant_ = expr.constant_term().trace();
  for (const auto& [k, m] : expr.coeffs()) {
    if (k >= scalar_dim_) throw MissingVariable("objective references unknown var");
    objective_(k) = m.trace();
  }
}

VectorXd ConicProgram::pack(
    const std::map<std::string, MatrixXd>& assignment) const {
  VectorXd x = VectorXd::Zero(scalar_dim_);
  for (const VarInfo& v : vars_) {
    auto it = assignment.find(v.name);
    if (it == assignment.end()) {
      throw MissingVariable("assignment lacks variable " + v.name);
    }
    const MatrixXd& m = it->second;
    if (m.rows() != v.rows || m.cols() != v.cols) {
      throw ShapeMismatch("assignment for " + v.name + " has wrong shape");
    }
    if (v.structure == VarStructure::Symmetric) {
      for (int j = 0; j < v.cols; ++j) {
        for (int i = j; i < v.rows; ++i) {
          x(v.offset + tri_index(i, j, v.rows)) = 0.5 * (m(i, j) + m(j, i));
        }
      }
    } else {
      int k = 0;
      for (int j = 0; j < v.cols; ++j) {
        for (int i = 0; i < v.rows; ++i) x(v.offset + k++) = m(i, j);
      }
    }
  }
  return x;
}

std::map<std::string, MatrixXd> ConicProgram::unpack(const VectorXd& x) const {
  std::map<std::string, MatrixXd> out;
  for (const VarInfo& v : vars_) {
    MatrixXd m(v.rows, v.cols);
    if (v.structure == VarStructure::Symmetric) {
      for (int j = 0; j < v.cols; ++j) {
        for (int i = j; i < v.rows; ++i) {
          const double val = x(v.offset + tri_index(i, j, v.rows));
          m(i, j) = val;
          m(j, i) = val;
        }
      }
    } else {
      int k = 0;
      for (int j = 0; j < v.cols; ++j) {
        for (int i = 0; i < v.rows; ++i) m(i, j) = x(v.offset + k++);
      }
    }
    out[v.name] = m;
  }
  return out;
}

namespace {

// Standard-form view of one constraint: F(x) = F0 + sum x_k F_k >= 0.
void to_standard_form(const Constraint& c, detail::LmiBlock& block) {
  const double sign = (c.sense == Sense::Geq) ? 1.0 : -1.0;
  const int n = c.expr.rows();
  MatrixXd f0 = sign * c.expr.constant_term() -
                c.margin * MatrixXd::Identity(n, n);
  block.F0 = 0.5 * (f0 + f0.transpose());
  block.terms.clear();
  for (const auto& [k, m] : c.expr.coeffs()) {
    block.terms.emplace_back(k, MatrixXd(0.5 * sign * (m + m.transpose())));
  }
}

}  // namespace

SolverReport solve(const ConicProgram& p, double tol) {
  if (p.scalar_dim() == 0) throw DomainError("program has no variables");
  if (p.constraints().empty()) throw DomainError("program has no constraints");

  std::vector<detail::LmiBlock> blocks(p.constraints().size());
  for (std::size_t j = 0; j < p.constraints().size(); ++j) {
    to_standard_form(p.constraints()[j], blocks[j]);
  }
  VectorXd c = p.objective();
  if (c.size() != p.scalar_dim()) c = VectorXd::Zero(p.scalar_dim());

  detail::IpmOptions opts;
  opts.tol = tol;
  opts.trace = std::getenv("DUALGS_IPM_TRACE") != nullptr;
  detail::IpmResult res = detail::solve_lmi_ipm(blocks, c, p.scalar_dim(), opts);

  SolverReport report;
  report.iterations = res.iterations;
  report.message = res.message;
  report.status = res.status;
  if (res.status == SolverStatus::Optimal) {
    report.assignment = p.unpack(res.x);
    report.objective_value = c.dot(res.x) + p.objective_constant();
    report.max_violation = check_assignment(p, report.assignment);
    if (report.max_violation > 10.0 * std::sqrt(tol)) {
      report.status = SolverStatus::NumericalFailure;
      report.message = "certificate check failed: violation " +
                       std::to_string(report.max_violation);
    }
  }
  return report;
}

double check_assignment(const ConicProgram& p,
                        const std::map<std::string, MatrixXd>& assignment) {
  const VectorXd x = p.pack(assignment);
  double worst = 0.0;
  for (const Constraint& c : p.constraints()) {
    const MatrixXd val = c.expr.evaluate(x);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(
        0.5 * (val + val.transpose()), Eigen::EigenvaluesOnly);
    double violation = 0.0;
    if (c.sense == Sense::Geq) {
      violation = c.margin - es.eigenvalues().minCoeff();
    } else {
      violation = es.eigenvalues().maxCoeff() + c.margin;
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

std::string ConicProgram::dump_standard_form_json() const {
  detail::json j;
  j["scalar_dim"] = scalar_dim_;
  j["vars"] = detail::json::array();
  for (const VarInfo& v : vars_) {
    j["vars"].push_back({{"name", v.name},
                         {"rows", v.rows},
                         {"cols", v.cols},
                         {"structure", v.structure == VarStructure::Symmetric
                                           ? "symmetric"
                                           : (v.structure == VarStructure::Scalar
                                                  ? "scalar"
                                                  : "rectangular")},
                         {"offset", v.offset},
                         {"scalar_size", v.scalar_size}});
  }
  if (objective_.size() == scalar_dim_) {
    j["objective"] = std::vector<double>(objective_.data(),
                                         objective_.data() + objective_.size());
  }
  j["constraints"] = detail::json::array();
  auto coords = [](const MatrixXd& m) {
    detail::json arr = detail::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index cc = 0; cc < m.cols(); ++cc) {
        if (m(r, cc) != 0.0) arr.push_back({r, cc, m(r, cc)});
      }
    }
    return arr;
  };
  for (const Constraint& c : constraints_) {
    detail::LmiBlock block;
    to_standard_form(c, block);
    detail::json jc;
    jc["name"] = c.name;
    jc["dim"] = c.expr.rows();
    jc["margin"] = c.margin;
    jc["sense"] = c.sense == Sense::Geq ? "geq" : "leq";
    jc["F0"] = coords(block.F0);
    jc["terms"] = detail::json::array();
    for (const auto& [k, m] : block.terms) {
      jc["terms"].push_back({{"var_scalar", k}, {"coords", coords(m)}});
    }
    j["constraints"].push_back(std::move(jc));
  }
  return j.dump(2);
}

}  // namespace dualgs::sdp
