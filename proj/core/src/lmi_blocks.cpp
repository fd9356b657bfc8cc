#include "dualgs/lmi_blocks.hpp"

namespace dualgs::lmi {

using sdp::affine_block;
using sdp::scalar_expand;

namespace {

AffineMat az(int r, int c) { return AffineMat::zero(r, c); }
AffineMat ac(const MatrixXd& m) { return AffineMat::constant(m); }

MatrixXd pd_inverse(const matkit::SymMatrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.mat());
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw SingularMatrix(std::string(what) + " must be positive definite");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

void GainSchedulingData::validate() const {
  if (A0.rows() != dims.nx || A0.cols() != dims.nx || B0.rows() != dims.nx ||
      B0.cols() != dims.nu) {
    throw ShapeMismatch("GainSchedulingData: estimate shapes");
  }
  if (perf.nz() != dims.nz) {
    throw ShapeMismatch("GainSchedulingData: performance channel height");
  }
  perf.validate(dims.nx, dims.nu);
}

void ExplorationData::validate() const {
  const int nx = static_cast<int>(A0.rows());
  const int nu = static_cast<int>(B0.cols());
  if (A0.cols() != nx || B0.rows() != nx) {
    throw ShapeMismatch("ExplorationData: estimate shapes");
  }
  if (Q.rows() != nx || Q.cols() != nx || R.rows() != nu || R.cols() != nu) {
    throw ShapeMismatch("ExplorationData: cost weight shapes");
  }
  if (D0.D.dim() != nx + nu) {
    throw ShapeMismatch("ExplorationData: D0 dimension");
  }
  if (!matkit::is_definite(matkit::SymMatrix(Q), matkit::Definite::Psd, 1e-12)) {
    throw DomainError("ExplorationData: Q must be PSD");
  }
  if (!matkit::is_definite(matkit::SymMatrix(R), matkit::Definite::Pos, 0.0)) {
    throw DomainError("ExplorationData: R must be PD");
  }
}

AffineMat s1_block(const AffineMat& W, const AffineMat& Y, const AffineMat& Z,
                   const MatrixXd& Q, const MatrixXd& R) {
  const int nx = W.rows();
  const int nu = Z.cols();
  if (W.cols() != nx || Z.rows() != nx || Y.rows() != nx + nu ||
      Y.cols() != nx + nu || Q.rows() != nx || R.rows() != nu) {
    throw ShapeMismatch("s1_block: shapes");
  }
  const MatrixXd q_half = matkit::sqrt_psd(matkit::SymMatrix(Q));
  const MatrixXd r_half = matkit::sqrt_psd(matkit::SymMatrix(R));

  const AffineMat top_right =
      affine_block({{W.left_mul(q_half)}, {Z.transpose().left_mul(r_half)}});
  return affine_block({{Y, top_right}, {top_right.transpose(), W}});
}

AffineMat se_block(double t_e, const AffineMat& Z_e, const AffineMat& W_e,
                   const AffineMat& Sigma, const MatrixXd& D0,
                   const MatrixXd& A0, const MatrixXd& B0, double sigma_w) {
  if (!(t_e > 0.0)) throw DomainError("se_block: t_e must be > 0");
  const int nx = W_e.rows();
  const int nu = Sigma.rows();
  if (Z_e.rows() != nx || Z_e.cols() != nu || D0.rows() != nx + nu ||
      A0.rows() != nx || B0.cols() != nu) {
    throw ShapeMismatch("se_block: shapes");
  }

  const AffineMat h_e = affine_block({{W_e, az(nx, nu)}, {az(nu, nx), Sigma}});
  const AffineMat f_e = affine_block(
      {{W_e.right_mul(A0.transpose()) + Z_e.right_mul(B0.transpose())},
       {Sigma.right_mul(B0.transpose())}});
  const AffineMat g_e = affine_block(
      {{(-1.0) * W_e, (-1.0) * Z_e}, {az(nu, nx), (-1.0) * Sigma}});
  const AffineMat c_e_shift =
      W_e - ac((sigma_w * sigma_w + t_e) * MatrixXd::Identity(nx, nx));

  const int p = nx + nu;
  return affine_block({{h_e, f_e, g_e},
                       {f_e.transpose(), c_e_shift, az(nx, p)},
                       {g_e.transpose(), az(p, nx), ac(t_e * D0)}});
}

AffineMat s2_gain_sched(const AffineMat& Ks, const AffineMat& M,
                        const AffineMat& N, double lambda_s, double lambda_u,
                        const AffineMat& Ds, const AffineMat& DbarT,
                        const GainSchedulingData& gs) {
  gs.validate();
  if (!(lambda_s > 0.0 && lambda_u > 0.0)) {
    throw DomainError("s2_gain_sched: multipliers must be > 0");
  }
  const int nx = gs.dims.nx;
  const int nu = gs.dims.nu;
  const int nz = gs.dims.nz;
  const plant::PerfChannel& pc = gs.perf;
  if (Ks.rows() != nu || Ks.cols() != nx || M.rows() != nu || M.cols() != nx ||
      N.rows() != nx || N.cols() != nx || Ds.rows() != nx + nu ||
      DbarT.rows() != nx + nu) {
    throw ShapeMismatch("s2_gain_sched: variable shapes");
  }

  const AffineMat cn_dm = N.left_mul(pc.C) + M.left_mul(pc.D);  // C N + D M
  const AffineMat d_ks = Ks.left_mul(pc.D);                     // D K_s
  const MatrixXd sp_t = pc.Sp.transpose();

  // Upper-left 4x4: signal-basis blocks (x, w^s, w^u, w) with the
  // performance coupling through S_p.
  const AffineMat ul = affine_block({
      {(-1.0) * N, az(nx, nx), az(nx, nx),
       cn_dm.transpose().right_mul(sp_t)},
      {az(nx, nx), ac(-lambda_s * MatrixXd::Identity(nx, nx)), az(nx, nx),
       d_ks.transpose().right_mul(sp_t)},
      {az(nx, nx), az(nx, nx), ac(-lambda_u * MatrixXd::Identity(nx, nx)),
       az(nx, nx)},
      {cn_dm.left_mul(pc.Sp), d_ks.left_mul(pc.Sp), az(nx, nx),
       ac(pc.Qp + pc.Dw.transpose() * sp_t + pc.Sp * pc.Dw)},
  });

  // Lower-left 4x4: closed-loop rows in the (N, M, K_s) parametrization.
  const AffineMat nm = affine_block({{N}, {M}});            // [N; M]
  const AffineMat zks = affine_block({{az(nx, nx)}, {Ks}});  // [0; K_s]
  const AffineMat ll = affine_block({
      {N.left_mul(gs.A0) + M.left_mul(gs.B0),
       ac(MatrixXd::Identity(nx, nx)) + Ks.left_mul(gs.B0),
       ac(MatrixXd::Identity(nx, nx)), ac(MatrixXd::Identity(nx, nx))},
      {nm, zks, az(nx + nu, nx), az(nx + nu, nx)},
      {nm, zks, az(nx + nu, nx), az(nx + nu, nx)},
      {cn_dm, d_ks, az(nz, nx), ac(pc.Dw)},
  });

  const MatrixXd rp_inv = pd_inverse(matkit::SymMatrix(pc.Rp), "R_p");
  const int p = nx + nu;
  const AffineMat lr = affine_block({
      {(-1.0) * N, az(nx, p), az(nx, p), az(nx, nz)},
      {az(p, nx), (-1.0 / lambda_s) * Ds, az(p, p), az(p, nz)},
      {az(p, nx), az(p, p), (-1.0 / lambda_u) * DbarT, az(p, nz)},
      {az(nz, nx), az(nz, p), az(nz, p), ac(-rp_inv)},
  });

  return affine_block({{ul, ll.transpose()}, {ll, lr}});
}

AffineMat s3_block(double eps, const MatrixXd& D0, const AffineMat& DbarT,
                   const AffineMat& Ds) {
  if (!(eps > 0.0)) throw DomainError("s3_block: eps must be > 0");
  const int p = static_cast<int>(D0.rows());
  if (DbarT.rows() != p || Ds.rows() != p) {
    throw ShapeMismatch("s3_block: shapes");
  }
  const AffineMat eps_d0 = ac(eps * D0);
  return affine_block({{eps_d0 - (1.0 + eps) * Ds, eps_d0},
                       {eps_d0, DbarT + eps_d0}});
}

AffineMat dbar_constraint(const AffineMat& W_e, const AffineMat& Z_e,
                          const AffineMat& Sigma, const AffineMat& DbarT,
                          const MatrixXd& K0, const MatrixXd& D0, double T,
                          double sigma_w, double c_delta) {
  if (T < 0.0) throw DomainError("dbar_constraint: T must be >= 0");
  const int nx = W_e.rows();
  const int nu = Sigma.rows();
  if (K0.rows() != nu || K0.cols() != nx || D0.rows() != nx + nu) {
    throw ShapeMismatch("dbar_constraint: shapes");
  }
  const MatrixXd k0_t = K0.transpose();
  // Affine lower bound of Z_e' W_e^-1 Z_e at V = [I K0'] plus Sigma.
  const AffineMat corner = Z_e.transpose().right_mul(k0_t) +
                           Z_e.left_mul(K0) -
                           W_e.left_mul(K0).right_mul(k0_t) + Sigma;
  const AffineMat bracket =
      affine_block({{W_e, Z_e}, {Z_e.transpose(), corner}});
  const double coeff = T / (sigma_w * sigma_w * c_delta);
  return coeff * bracket + ac(D0) - DbarT;
}

ClosedLoopRows closed_loop_rows(const MatrixXd& K, const MatrixXd& Ks,
                                const GainSchedulingData& gs) {
  const int nx = gs.dims.nx;
  const int nu = gs.dims.nu;
  const int nz = gs.dims.nz;
  if (K.rows() != nu || K.cols() != nx || Ks.rows() != nu || Ks.cols() != nx) {
    throw ShapeMismatch("closed_loop_rows: gain shapes");
  }
  const MatrixXd eye = MatrixXd::Identity(nx, nx);

  ClosedLoopRows rows;
  rows.A_cl.resize(nx, 4 * nx);
  rows.A_cl << gs.A0 + gs.B0 * K, eye + gs.B0 * Ks, eye, eye;

  MatrixXd ik(nx + nu, nx), zks(nx + nu, nx);
  ik << eye, K;
  zks << MatrixXd::Zero(nx, nx), Ks;
  rows.Cs_cl.resize(nx + nu, 4 * nx);
  rows.Cs_cl << ik, zks, MatrixXd::Zero(nx + nu, nx), MatrixXd::Zero(nx + nu, nx);
  rows.Cu_cl = rows.Cs_cl;

  rows.Cz_cl.resize(nz, 4 * nx);
  rows.Cz_cl << gs.perf.C + gs.perf.D * K, gs.perf.D * Ks,
      MatrixXd::Zero(nz, nx), gs.perf.Dw;
  return rows;
}

AffineMat analysis_lmi(const AffineMat& X, const AffineMat& lambda_s,
                       const AffineMat& lambda_u, const MatrixXd& K,
                       const MatrixXd& Ks, const matkit::SymMatrix& Ds,
                       const matkit::SymMatrix& DbarT,
                       const GainSchedulingData& gs) {
  gs.validate();
  const int nx = gs.dims.nx;
  const ClosedLoopRows rows = closed_loop_rows(K, Ks, gs);
  const MatrixXd r_s = pd_inverse(Ds, "D_s");       // R_s = D_s^-1
  const MatrixXd r_u = pd_inverse(DbarT, "DbarT");  // R_u = DbarT^-1

  // Signal-basis selectors in [x; w^s; w^u; w].
  MatrixXd e_x = MatrixXd::Zero(nx, 4 * nx);
  MatrixXd e_ws = MatrixXd::Zero(nx, 4 * nx);
  MatrixXd e_wu = MatrixXd::Zero(nx, 4 * nx);
  MatrixXd e_w = MatrixXd::Zero(nx, 4 * nx);
  e_x.middleCols(0, nx).setIdentity();
  e_ws.middleCols(nx, nx).setIdentity();
  e_wu.middleCols(2 * nx, nx).setIdentity();
  e_w.middleCols(3 * nx, nx).setIdentity();

  // Lyapunov part: A_cl' X A_cl - E_x' X E_x.
  AffineMat expr = X.left_mul(rows.A_cl.transpose()).right_mul(rows.A_cl) -
                   X.left_mul(e_x.transpose()).right_mul(e_x);

  // Scheduling multiplier lambda_s * (Q_s on w^s + R_s on z^s), Q_s = -I.
  const MatrixXd term_s = -e_ws.transpose() * e_ws +
                          rows.Cs_cl.transpose() * r_s * rows.Cs_cl;
  expr = expr + scalar_expand(lambda_s, term_s);

  // Uncertainty multiplier, Q_u = -I.
  const MatrixXd term_u = -e_wu.transpose() * e_wu +
                          rows.Cu_cl.transpose() * r_u * rows.Cu_cl;
  expr = expr + scalar_expand(lambda_u, term_u);

  // Performance multiplier on (w, z).
  const MatrixXd sp_cz = e_w.transpose() * gs.perf.Sp * rows.Cz_cl;
  const MatrixXd term_p = e_w.transpose() * gs.perf.Qp * e_w + sp_cz +
                          sp_cz.transpose() +
                          rows.Cz_cl.transpose() * gs.perf.Rp * rows.Cz_cl;
  return expr + AffineMat::constant(term_p);
}

matkit::SymMatrix analysis_lmi_fixed(const MatrixXd& K, const MatrixXd& Ks,
                                     const matkit::SymMatrix& X,
                                     double lambda_s, double lambda_u,
                                     const matkit::SymMatrix& Ds,
                                     const matkit::SymMatrix& DbarT,
                                     const GainSchedulingData& gs) {
  const AffineMat one = AffineMat::identity(1);
  const AffineMat expr =
      analysis_lmi(AffineMat::constant(X.mat()), lambda_s * one,
                   lambda_u * one, K, Ks, Ds, DbarT, gs);
  return matkit::SymMatrix(expr.evaluate(Eigen::VectorXd()));
}

}  // namespace dualgs::lmi
