#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

#include "dualgs/errors.hpp"
#include "dualgs/rng.hpp"

namespace dualgs::matkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Default certification tolerance for strict definiteness tests. Strict
// inequalities M < 0 are certified as M <= -tol*I.
inline constexpr double kDefaultDefiniteTol = 1e-7;

// Relative eigenvalue clamp for PSD square roots / sampling factors: solver
// output is only epsilon-feasible, so eigenvalues in [-kPsdClampRel*||M||, 0)
// are treated as zero.
inline constexpr double kPsdClampRel = 1e-9;

// Dense symmetric matrix; symmetry is enforced on construction by averaging
// with the transpose, so entries(i,j) == entries(j,i) holds exactly.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const MatrixXd& m);
  static SymMatrix identity(int dim);
  static SymMatrix zero(int dim);

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const MatrixXd& mat() const { return m_; }

 private:
  MatrixXd m_;
};

// One cell of a block grid: a dense matrix, or a Zero/Identity marker that
// takes its shape from the row/column dims of its slot.
struct ZeroBlock {};
struct IdentityBlock {};
using Block = std::variant<MatrixXd, ZeroBlock, IdentityBlock>;

struct BlockSpec {
  std::vector<int> row_dims;
  std::vector<int> col_dims;
  std::vector<std::vector<Block>> blocks;  // blocks[i][j] fills slot (i, j)
};

// Concatenates the block grid into one dense matrix. Throws ShapeMismatch if
// any dense block disagrees with its slot or an Identity marker sits in a
// non-square slot.
MatrixXd assemble(const BlockSpec& spec);

// Extracts the (i, j) block of a matrix previously assembled from `spec`.
MatrixXd extract_block(const MatrixXd& m, const BlockSpec& spec, int i, int j);

// Schur complement A - B C^-1 B^T of [[A, B], [B^T, C]], where `split` is the
// dimension of A. Throws SingularBlock when C is numerically singular
// (condition number above `cond_cap`).
SymMatrix schur_complement(const SymMatrix& m, int split,
                           double cond_cap = 1e12);

enum class Definite { Pos, Neg, Psd, Nsd };

// Eigenvalue-based definiteness test with reportable margin: strict senses
// require every eigenvalue beyond +/-tol, semidefinite senses allow +/-tol.
// NaN entries throw InvalidMatrix.
bool is_definite(const SymMatrix& m, Definite sense,
                 double tol = kDefaultDefiniteTol);

// Smallest eigenvalue (the margin is_definite decides on).
double min_eigenvalue(const SymMatrix& m);

// Symmetric PSD square root S with S*S = m. Eigenvalues in
// [-kPsdClampRel*||m||, 0) are clamped to zero; below that throws NotPsd.
MatrixXd sqrt_psd(const SymMatrix& m);

// Draws L*g with L = sqrt_psd(cov) and g i.i.d. standard normal from `rng`.
// Always consumes exactly cov.dim() normals, so stream alignment does not
// depend on cov.
VectorXd gaussian_sample(const SymMatrix& cov, RngStream& rng);

}  // namespace dualgs::matkit
