#include "dualgs/matrix_kit.hpp"

#include <cmath>

namespace dualgs::matkit {

SymMatrix::SymMatrix(const MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw ShapeMismatch("SymMatrix requires a square matrix of dim >= 1");
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(int dim) {
  return SymMatrix(MatrixXd::Identity(dim, dim));
}

SymMatrix SymMatrix::zero(int dim) {
  return SymMatrix(MatrixXd::Zero(dim, dim));
}

MatrixXd assemble(const BlockSpec& spec) {
  const int nr = static_cast<int>(spec.row_dims.size());
  const int nc = static_cast<int>(spec.col_dims.size());
  if (nr == 0 || nc == 0 || static_cast<int>(spec.blocks.size()) != nr) {
    throw ShapeMismatch("block grid does not match row_dims/col_dims");
  }
  int total_rows = 0, total_cols = 0;
  for (int d : spec.row_dims) total_rows += d;
  for (int d : spec.col_dims) total_cols += d;

  MatrixXd out = MatrixXd::Zero(total_rows, total_cols);
  int r0 = 0;
  for (int i = 0; i < nr; ++i) {
    if (static_cast<int>(spec.blocks[i].size()) != nc) {
      throw ShapeMismatch("block row " + std::to_string(i) + " has wrong arity");
    }
    int c0 = 0;
    const int rd = spec.row_dims[i];
    for (int j = 0; j < nc; ++j) {
      const int cd = spec.col_dims[j];
      const Block& b = spec.blocks[i][j];
      if (std::holds_alternative<MatrixXd>(b)) {
        const MatrixXd& m = std::get<MatrixXd>(b);
        if (m.rows() != rd || m.cols() != cd) {
          throw ShapeMismatch("block (" + std::to_string(i) + "," +
                              std::to_string(j) + ") is " +
                              std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + ", slot wants " +
                              std::to_string(rd) + "x" + std::to_string(cd));
        }
        out.block(r0, c0, rd, cd) = m;
      } else if (std::holds_alternative<IdentityBlock>(b)) {
        if (rd != cd) {
          throw ShapeMismatch("Identity marker in non-square slot (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
        }
        out.block(r0, c0, rd, cd) = MatrixXd::Identity(rd, cd);
      }
      // ZeroBlock: already zero.
      c0 += cd;
    }
    r0 += rd;
  }
  return out;
}

MatrixXd extract_block(const MatrixXd& m, const BlockSpec& spec, int i, int j) {
  int r0 = 0, c0 = 0;
  for (int k = 0; k < i; ++k) r0 += spec.row_dims[k];
  for (int k = 0; k < j; ++k) c0 += spec.col_dims[k];
  return m.block(r0, c0, spec.row_dims[i], spec.col_dims[j]);
}

SymMatrix schur_complement(const SymMatrix& m, int split, double cond_cap) {
  const int n = m.dim();
  if (split < 1 || split >= n) {
    throw ShapeMismatch("schur_complement split must be in [1, dim)");
  }
  const MatrixXd& full = m.mat();
  const MatrixXd a = full.topLeftCorner(split, split);
  const MatrixXd b = full.topRightCorner(split, n - split);
  const MatrixXd c = full.bottomRightCorner(n - split, n - split);

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
  const double lo = es.eigenvalues().cwiseAbs().minCoeff();
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  if (lo <= 0.0 || hi / lo > cond_cap) {
    throw SingularBlock("trailing block is numerically singular (cond > cap)");
  }
  const MatrixXd c_inv_bt = es.eigenvectors() *
                            es.eigenvalues().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose() * b.transpose();
  return SymMatrix(a - b * c_inv_bt);
}

bool is_definite(const SymMatrix& m, Definite sense, double tol) {
  if (tol < 0.0) throw DomainError("is_definite tol must be >= 0");
  if (!m.mat().allFinite()) throw InvalidMatrix("matrix has NaN/Inf entries");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.mat(),
                                             Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  switch (sense) {
    case Definite::Pos: return lo > tol;
    case Definite::Neg: return hi < -tol;
    case Definite::Psd: return lo >= -tol;
    case Definite::Nsd: return hi <= tol;
  }
  return false;
}

double min_eigenvalue(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.mat(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

MatrixXd sqrt_psd(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.mat());
  VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  const double clamp = kPsdClampRel * scale;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -clamp) {
      throw NotPsd("eigenvalue " + std::to_string(ev(i)) +
                   " below clamp threshold " + std::to_string(-clamp));
    }
    ev(i) = std::max(ev(i), 0.0);
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

VectorXd gaussian_sample(const SymMatrix& cov, RngStream& rng) {
  const MatrixXd factor = sqrt_psd(cov);
  VectorXd g(cov.dim());
  for (int i = 0; i < g.size(); ++i) g(i) = rng.gaussian();
  return factor * g;
}

}  // namespace dualgs::matkit
