#include "ipm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace dualgs::detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Symmetric f(M) via eigendecomposition; returns false if any eigenvalue
// fails `ok`.
template <typename F, typename Ok>
bool sym_fun(const MatrixXd& m, F f, Ok ok, MatrixXd& out) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(m));
  VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (!ok(ev(i))) return false;
    ev(i) = f(ev(i));
  }
  out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return true;
}

bool sqrt_pd(const MatrixXd& m, MatrixXd& out) {
  return sym_fun(m, [](double v) { return std::sqrt(v); },
                 [](double v) { return v > 0.0; }, out);
}

bool invsqrt_pd(const MatrixXd& m, MatrixXd& out) {
  return sym_fun(m, [](double v) { return 1.0 / std::sqrt(v); },
                 [](double v) { return v > 0.0; }, out);
}

bool inv_pd(const MatrixXd& m, MatrixXd& out) {
  return sym_fun(m, [](double v) { return 1.0 / v; },
                 [](double v) { return v > 0.0; }, out);
}

// Largest alpha in (0, 1] with P + alpha*dP staying PD, shrunk by `frac`.
double max_step(const MatrixXd& p, const MatrixXd& dp, double frac) {
  MatrixXd p_invsqrt;
  if (!invsqrt_pd(p, p_invsqrt)) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(
      sym(p_invsqrt * dp * p_invsqrt), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo >= 0.0) return 1.0;
  return std::min(1.0, -frac / lo);
}

struct ScaledProblem {
  std::vector<LmiBlock> blocks;
  VectorXd c;
  VectorXd col_scale;   // x_original_k = x_scaled_k / col_scale_k
  double obj_scale = 1.0;
};

ScaledProblem equilibrate(const std::vector<LmiBlock>& blocks,
                          const VectorXd& c, int m) {
  ScaledProblem sp;
  sp.blocks = blocks;
  sp.c = c;
  sp.col_scale = VectorXd::Ones(m);

  // Per-block row scaling to unit magnitude.
  for (LmiBlock& b : sp.blocks) {
    double s = b.F0.cwiseAbs().maxCoeff();
    for (const auto& [k, f] : b.terms) {
      s = std::max(s, f.cwiseAbs().maxCoeff());
    }
    if (s > 0.0) {
      b.F0 /= s;
      for (auto& [k, f] : b.terms) f /= s;
    }
  }
  // Column equilibration: x_k = x~_k / d_k with d_k the max coefficient norm.
  for (int k = 0; k < m; ++k) {
    double d = 0.0;
    for (const LmiBlock& b : sp.blocks) {
      for (const auto& [idx, f] : b.terms) {
        if (idx == k) d = std::max(d, f.cwiseAbs().maxCoeff());
      }
    }
    if (d > 0.0) {
      sp.col_scale(k) = d;
      for (LmiBlock& b : sp.blocks) {
        for (auto& [idx, f] : b.terms) {
          if (idx == k) f /= d;
        }
      }
      sp.c(k) /= d;
    }
  }
  const double cn = sp.c.cwiseAbs().maxCoeff();
  if (cn > 0.0) {
    sp.obj_scale = cn;
    sp.c /= cn;
  }
  return sp;
}

}  // namespace

IpmResult solve_lmi_ipm(const std::vector<LmiBlock>& blocks_in,
                        const VectorXd& c_in, int m, const IpmOptions& opts) {
  IpmResult result;
  const ScaledProblem sp = equilibrate(blocks_in, c_in, m);
  const std::vector<LmiBlock>& blocks = sp.blocks;
  const int nblocks = static_cast<int>(blocks.size());

  int total_dim = 0;
  double f0_norm = 0.0;
  for (const LmiBlock& b : blocks) {
    total_dim += static_cast<int>(b.F0.rows());
    f0_norm += b.F0.squaredNorm();
  }
  f0_norm = std::sqrt(f0_norm);

  VectorXd x = VectorXd::Zero(m);
  std::vector<MatrixXd> S(nblocks), Z(nblocks);
  for (int j = 0; j < nblocks; ++j) {
    const int d = static_cast<int>(blocks[j].F0.rows());
    S[j] = MatrixXd::Identity(d, d);
    Z[j] = MatrixXd::Identity(d, d);
  }

  std::vector<MatrixXd> Rp(nblocks), V(nblocks), Sinv(nblocks);
  std::vector<MatrixXd> Whalf(nblocks), Winvhalf(nblocks);
  std::vector<Eigen::SelfAdjointEigenSolver<MatrixXd>> lambda_es(nblocks);
  // VFV[j][t]: V_j * F_{j,t} * V_j for each stored term t of block j.
  std::vector<std::vector<MatrixXd>> VFV(nblocks);

  auto evaluate_block = [&](int j) {
    MatrixXd val = blocks[j].F0;
    for (const auto& [k, f] : blocks[j].terms) val += x(k) * f;
    return val;
  };

  // Best iterate seen so far; returned when the endgame breaks down (the
  // dual residual typically stalls near machine precision while mu keeps
  // shrinking, after which the NT scaling degenerates).
  VectorXd best_x = x;
  double best_score = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  const double accept_score = 200.0 * opts.tol;
  double cert_obj = 0.0, cert_orth = std::numeric_limits<double>::infinity();
  auto finish_with_best = [&](const char* why) {
    if (best_score <= accept_score) {
      result.status = sdp::SolverStatus::Optimal;
      result.x = best_x.cwiseQuotient(sp.col_scale);
      result.message = std::string("optimal (") + why + ")";
    } else if (cert_obj < -1e-6 && cert_orth <= 1e-2 * (-cert_obj)) {
      // The dual ray points at a Farkas certificate even though it has not
      // fully converged; treat as infeasible rather than a solver failure.
      result.status = sdp::SolverStatus::Infeasible;
      result.message = std::string("infeasible (weak certificate, ") + why + ")";
    } else {
      result.status = sdp::SolverStatus::NumericalFailure;
      result.message = why;
    }
    return result;
  };

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    result.iterations = iter + 1;

    // Residuals.
    double p_res_sq = 0.0;
    for (int j = 0; j < nblocks; ++j) {
      Rp[j] = evaluate_block(j) - S[j];
      p_res_sq += Rp[j].squaredNorm();
    }
    const double p_res = std::sqrt(p_res_sq) / (1.0 + f0_norm);

    VectorXd r_d = sp.c;
    for (int j = 0; j < nblocks; ++j) {
      for (const auto& [k, f] : blocks[j].terms) {
        r_d(k) -= (f.array() * Z[j].array()).sum();
      }
    }
    const double d_res = r_d.norm() / (1.0 + sp.c.norm());

    double gap = 0.0, dual_obj = 0.0, z_trace = 0.0;
    for (int j = 0; j < nblocks; ++j) {
      gap += (S[j].array() * Z[j].array()).sum();
      dual_obj -= (blocks[j].F0.array() * Z[j].array()).sum();
      z_trace += Z[j].trace();
    }
    const double primal_obj = sp.c.dot(x);
    const double mu = gap / total_dim;
    const double rel_gap =
        std::fabs(primal_obj - dual_obj) /
        (1.0 + std::fabs(primal_obj) + std::fabs(dual_obj));

    if (opts.trace) {
      std::fprintf(stderr,
                   "ipm iter %3d  p_res %.3e  d_res %.3e  gap %.3e  mu %.3e\n",
                   iter, p_res, d_res, rel_gap, mu);
    }

    const double score = std::max({p_res, d_res, std::min(rel_gap, mu)});
    if (score < 0.99 * best_score) {
      stagnant = 0;
    } else {
      ++stagnant;
    }
    if (score < best_score) {
      best_score = score;
      best_x = x;
    }
    if (stagnant > 40) {
      return finish_with_best("stalled");
    }

    if (p_res <= opts.tol && d_res <= opts.tol &&
        (rel_gap <= opts.tol || mu <= opts.tol * 1e-2)) {
      result.status = sdp::SolverStatus::Optimal;
      result.x = x.cwiseQuotient(sp.col_scale);
      result.message = "optimal";
      return result;
    }
    if (mu < 1e-2 * opts.tol * opts.tol && p_res <= opts.tol) {
      // Complementarity exhausted; the dual residual has hit its floor.
      return finish_with_best("gap exhausted");
    }

    // Farkas-type infeasibility certificate: Z >= 0 (normalized) with
    // <F_k, Z> ~ 0 for all k and <F0, Z> < 0 proves the LMI system empty.
    if (iter >= 5 && z_trace > 1.0) {
      VectorXd a = VectorXd::Zero(m);
      cert_obj = 0.0;
      for (int j = 0; j < nblocks; ++j) {
        cert_obj += (blocks[j].F0.array() * Z[j].array()).sum();
        for (const auto& [k, f] : blocks[j].terms) {
          a(k) += (f.array() * Z[j].array()).sum();
        }
      }
      cert_obj /= z_trace;
      cert_orth = a.cwiseAbs().maxCoeff() / z_trace;
      if (opts.trace) {
        std::fprintf(stderr,
                     "          cert_obj %.3e  cert_orth %.3e  z_trace %.3e\n",
                     cert_obj, cert_orth, z_trace);
      }
      if (cert_obj < -1e-7 &&
          cert_orth <= std::max(1e-9, 1e-4 * (-cert_obj))) {
        result.status = sdp::SolverStatus::Infeasible;
        result.message = "infeasibility certificate found";
        return result;
      }
    }
    if (std::fabs(primal_obj) > 1e14) {
      result.status = sdp::SolverStatus::NumericalFailure;
      result.message = "iterates diverged (problem may be unbounded)";
      return result;
    }

    // NT scaling V = W^-1 via V S V = Z: V = Z^1/2 (Z^1/2 S Z^1/2)^-1/2 Z^1/2.
    bool scaling_ok = true;
    for (int j = 0; j < nblocks; ++j) {
      MatrixXd zh, t_invsqrt;
      if (!sqrt_pd(Z[j], zh) ||
          !invsqrt_pd(zh * S[j] * zh, t_invsqrt) ||
          !inv_pd(S[j], Sinv[j])) {
        scaling_ok = false;
        break;
      }
      V[j] = sym(zh * t_invsqrt * zh);
      Eigen::SelfAdjointEigenSolver<MatrixXd> ves(V[j]);
      if (ves.eigenvalues().minCoeff() <= 0.0) {
        scaling_ok = false;
        break;
      }
      Whalf[j] = ves.eigenvectors() *
                 ves.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                 ves.eigenvectors().transpose();
      Winvhalf[j] = ves.eigenvectors() *
                    ves.eigenvalues().cwiseSqrt().asDiagonal() *
                    ves.eigenvectors().transpose();
      lambda_es[j].compute(sym(Winvhalf[j] * S[j] * Winvhalf[j]));
      if (lambda_es[j].eigenvalues().minCoeff() <= 0.0) {
        scaling_ok = false;
        break;
      }
    }
    if (!scaling_ok) {
      return finish_with_best("scaling breakdown");
    }

    // Schur system M dx = rhs(sigma).
    MatrixXd M = MatrixXd::Zero(m, m);
    for (int j = 0; j < nblocks; ++j) {
      const auto& terms = blocks[j].terms;
      VFV[j].resize(terms.size());
      for (std::size_t t = 0; t < terms.size(); ++t) {
        VFV[j][t] = V[j] * terms[t].second * V[j];
      }
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const int kt = terms[t].first;
        for (std::size_t s = t; s < terms.size(); ++s) {
          const int ks = terms[s].first;
          const double v = (terms[t].second.array() * VFV[j][s].array()).sum();
          M(kt, ks) += v;
          if (kt != ks) M(ks, kt) += v;
        }
      }
    }
    // Tiny ridge for safety; problems are well-scaled after equilibration.
    M.diagonal().array() += 1e-13 * (1.0 + M.trace() / m);
    Eigen::LDLT<MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success || !M.allFinite()) {
      return finish_with_best("factorization breakdown");
    }

    // rhs(sigma) = sigma*mu*<F, S^-1> - <F, V (S + Rp) V> ... assembled from
    // two parts so the affine and combined directions share the factorization.
    VectorXd rhs_base = VectorXd::Zero(m), rhs_mu = VectorXd::Zero(m);
    for (int j = 0; j < nblocks; ++j) {
      const MatrixXd base_j = V[j] * Rp[j] * V[j];  // note V S V = Z
      for (const auto& [k, f] : blocks[j].terms) {
        rhs_base(k) -= (f.array() * base_j.array()).sum();
        rhs_mu(k) += (f.array() * Sinv[j].array()).sum();
      }
    }
    rhs_base -= sp.c;  // combines -Z term with r_d as derived

    // corr[j] is the Mehrotra second-order term mapped back from the scaled
    // space; zero on the predictor pass.
    std::vector<MatrixXd> corr(nblocks);
    for (int j = 0; j < nblocks; ++j) {
      corr[j] = MatrixXd::Zero(S[j].rows(), S[j].cols());
    }

    auto directions = [&](double sigma_mu, VectorXd& dx,
                          std::vector<MatrixXd>& dS, std::vector<MatrixXd>& dZ) {
      VectorXd rhs = rhs_base + sigma_mu * rhs_mu;
      for (int j = 0; j < nblocks; ++j) {
        if (corr[j].isZero(0.0)) continue;
        for (const auto& [k, f] : blocks[j].terms) {
          rhs(k) -= (f.array() * corr[j].array()).sum();
        }
      }
      dx = ldlt.solve(rhs);
      dS.resize(nblocks);
      dZ.resize(nblocks);
      for (int j = 0; j < nblocks; ++j) {
        MatrixXd sum_f = MatrixXd::Zero(S[j].rows(), S[j].cols());
        for (const auto& [k, f] : blocks[j].terms) sum_f += dx(k) * f;
        dS[j] = sym(sum_f + Rp[j]);
        dZ[j] = sym(sigma_mu * Sinv[j] - Z[j] -
                    V[j] * (Rp[j] + sum_f) * V[j] - corr[j]);
      }
    };

    const double tau = iter < 5 ? 0.90 : opts.step_fraction;
    auto step_lengths = [&](const std::vector<MatrixXd>& dS,
                            const std::vector<MatrixXd>& dZ, double& a_s,
                            double& a_z) {
      a_s = 1.0;
      a_z = 1.0;
      for (int j = 0; j < nblocks; ++j) {
        a_s = std::min(a_s, max_step(S[j], dS[j], tau));
        a_z = std::min(a_z, max_step(Z[j], dZ[j], tau));
      }
    };

    // Predictor pass fixes the centering parameter and the corrector term.
    VectorXd dx_aff;
    std::vector<MatrixXd> dS_aff, dZ_aff;
    directions(0.0, dx_aff, dS_aff, dZ_aff);
    double a_s = 0.0, a_z = 0.0;
    step_lengths(dS_aff, dZ_aff, a_s, a_z);
    double gap_aff = 0.0;
    for (int j = 0; j < nblocks; ++j) {
      gap_aff += ((S[j] + a_s * dS_aff[j]).array() *
                  (Z[j] + a_z * dZ_aff[j]).array())
                     .sum();
    }
    const double mu_aff = std::max(gap_aff / total_dim, 0.0);
    double sigma = std::pow(mu_aff / mu, 3.0);
    sigma = std::clamp(sigma, 1e-6, 0.99);

    // Second-order term: in the Lambda eigenbasis the Lyapunov operator
    // L(D) = (D Lambda + Lambda D)/2 inverts entrywise, so
    // corr = W^-1/2 U [2 (U' G U)_ij / (d_i + d_j)] U' W^-1/2 with
    // G = sym(dS~ dZ~) built from the scaled predictor directions.
    for (int j = 0; j < nblocks; ++j) {
      // dS~ = W^-1/2 dS W^-1/2 (Winvhalf is W^-1/2), dZ~ = W^1/2 dZ W^1/2.
      const MatrixXd ds_tilde = Winvhalf[j] * dS_aff[j] * Winvhalf[j];
      const MatrixXd dz_tilde = Whalf[j] * dZ_aff[j] * Whalf[j];
      const MatrixXd g = sym(ds_tilde * dz_tilde);
      const MatrixXd& u = lambda_es[j].eigenvectors();
      const VectorXd& d = lambda_es[j].eigenvalues();
      MatrixXd g_basis = u.transpose() * g * u;
      for (int r = 0; r < g_basis.rows(); ++r) {
        for (int cidx = 0; cidx < g_basis.cols(); ++cidx) {
          g_basis(r, cidx) *= 2.0 / (d(r) + d(cidx));
        }
      }
      corr[j] = sym(Winvhalf[j] * u * g_basis * u.transpose() * Winvhalf[j]);
    }

    VectorXd dx;
    std::vector<MatrixXd> dS, dZ;
    directions(sigma * mu, dx, dS, dZ);
    step_lengths(dS, dZ, a_s, a_z);
    if (a_s < 1e-10 && a_z < 1e-10) {
      return finish_with_best("step collapse");
    }

    if (opts.trace) {
      std::fprintf(stderr, "          sigma %.3e  a_s %.3e  a_z %.3e\n",
                   sigma, a_s, a_z);
    }

    x += a_s * dx;
    for (int j = 0; j < nblocks; ++j) {
      S[j] = sym(S[j] + a_s * dS[j]);
      Z[j] = sym(Z[j] + a_z * dZ[j]);
    }
  }

  return finish_with_best("iteration limit");
}

}  // namespace dualgs::detail
