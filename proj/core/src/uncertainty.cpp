#include "dualgs/uncertainty.hpp"

namespace dualgs::uncertainty {

namespace {

MatrixXd pd_inverse(const matkit::SymMatrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.mat());
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw SingularInfo(std::string(what) + " must be positive definite");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

DeltaBound delta_u_bound(const estimate::InfoMatrix& info_T, int nx) {
  DeltaBound b;
  b.P = matkit::SymMatrix(pd_inverse(info_T.D, "D_T"));
  b.rows = nx;
  return b;
}

DeltaBound delta_s_bound(double eps, const estimate::InfoMatrix& D0,
                         const estimate::InfoMatrix& DT, int nx) {
  if (!(eps > 0.0)) throw DomainError("delta_s_bound: eps must be > 0");
  const MatrixXd inv0 = pd_inverse(D0.D, "D_0");
  const MatrixXd invT = pd_inverse(DT.D, "D_T");
  DeltaBound b;
  b.P = matkit::SymMatrix((1.0 + 1.0 / eps) * inv0 + (1.0 + eps) * invT);
  b.rows = nx;
  return b;
}

matkit::SymMatrix ds_feasibility_block(double eps, const matkit::SymMatrix& D0,
                                       const matkit::SymMatrix& DbarT,
                                       const matkit::SymMatrix& Ds) {
  if (!(eps > 0.0)) throw DomainError("ds_feasibility_block: eps must be > 0");
  const int n = D0.dim();
  if (DbarT.dim() != n || Ds.dim() != n) {
    throw ShapeMismatch("ds_feasibility_block: dimension mismatch");
  }
  MatrixXd block(2 * n, 2 * n);
  block.topLeftCorner(n, n) = eps * D0.mat() - (1.0 + eps) * Ds.mat();
  block.topRightCorner(n, n) = eps * D0.mat();
  block.bottomLeftCorner(n, n) = eps * D0.mat();
  block.bottomRightCorner(n, n) = DbarT.mat() + eps * D0.mat();
  return matkit::SymMatrix(block);
}

MatrixXd sample_delta(const DeltaBound& bound, RngStream& rng,
                      double boundary_fraction) {
  const int rows = bound.rows;
  const int cols = bound.cols();
  if (rows < 1 || rows > cols) {
    throw ShapeMismatch("sample_delta: bound.rows must be in [1, dim(P)]");
  }

  // Orthonormal rows via QR of a Gaussian matrix; sign-fixed for stability.
  MatrixXd g(cols, rows);
  for (int i = 0; i < cols; ++i) {
    for (int j = 0; j < rows; ++j) g(i, j) = rng.gaussian();
  }
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(cols, rows);
  const MatrixXd r = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  for (int j = 0; j < rows; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  const MatrixXd u = q.transpose();  // rows x cols, U U' = I

  Eigen::VectorXd s(cols);
  if (rng.uniform() < boundary_fraction) {
    s.setOnes();
  } else {
    for (int i = 0; i < cols; ++i) s(i) = rng.uniform();
  }
  return u * s.asDiagonal() * matkit::sqrt_psd(bound.P);
}

}  // namespace dualgs::uncertainty
