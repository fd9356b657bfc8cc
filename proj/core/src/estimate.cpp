#include "dualgs/estimate.hpp"

#include <cmath>

#include "json_util.hpp"

namespace dualgs::estimate {

void DataSet::append(const plant::Trajectory& traj) {
  for (int k = 0; k < traj.horizon(); ++k) {
    x.push_back(traj.states[k]);
    u.push_back(traj.inputs[k]);
    x_next.push_back(traj.states[k + 1]);
  }
}

void DataSet::append(const DataSet& other) {
  x.insert(x.end(), other.x.begin(), other.x.end());
  u.insert(u.end(), other.u.begin(), other.u.end());
  x_next.insert(x_next.end(), other.x_next.begin(), other.x_next.end());
}

Estimate least_squares(const DataSet& data) {
  if (data.size() == 0) throw RankDeficient("no samples");
  const int nx = static_cast<int>(data.x[0].size());
  const int nu = static_cast<int>(data.u[0].size());
  const int p = nx + nu;
  if (data.size() < p) {
    throw RankDeficient("fewer samples than regressor dimension");
  }

  MatrixXd phi(data.size(), p);       // rows [x_k' u_k']
  MatrixXd target(data.size(), nx);   // rows x_{k+1}'
  for (int k = 0; k < data.size(); ++k) {
    phi.row(k).head(nx) = data.x[k].transpose();
    phi.row(k).tail(nu) = data.u[k].transpose();
    target.row(k) = data.x_next[k].transpose();
  }

  Eigen::ColPivHouseholderQR<MatrixXd> qr(phi);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    throw RankDeficient("regressors are rank-deficient (rank " +
                        std::to_string(qr.rank()) + " < " + std::to_string(p) +
                        "); input not persistently exciting");
  }
  const MatrixXd theta = qr.solve(target);  // p x nx, [A'; B']
  Estimate est;
  est.A_hat = theta.topRows(nx).transpose();
  est.B_hat = theta.bottomRows(nu).transpose();
  return est;
}

namespace {

// Regularized lower incomplete gamma P(a, x): series for x < a+1, continued
// fraction for the complement otherwise.
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Lentz continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

}  // namespace

double chi2_quantile(int dof, double delta) {
  if (dof < 1) throw DomainError("chi2_quantile: dof must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("chi2_quantile: delta must lie in (0, 1)");
  }
  const double a = 0.5 * dof;
  const double target = 1.0 - delta;  // CDF(q) = 1 - delta

  // Bracket, then bisection with a Newton polish.
  double lo = 0.0;
  double hi = dof + 20.0 * std::sqrt(2.0 * dof) + 100.0;
  while (gamma_p(a, 0.5 * hi) < target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_p(a, 0.5 * mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  double q = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {
    const double f = gamma_p(a, 0.5 * q) - target;
    // chi2 pdf at q.
    const double logpdf = (a - 1.0) * std::log(q) - 0.5 * q - a * std::log(2.0) -
                          std::lgamma(a);
    const double pdf = std::exp(logpdf);
    if (pdf <= 0.0) break;
    const double step = f / pdf;
    q -= step;
    if (std::fabs(step) < 1e-14 * (1.0 + q)) break;
  }
  return q;
}

InfoMatrix info_matrix(const DataSet& data, double sigma_w, double c_delta) {
  if (!(sigma_w > 0.0)) throw DomainError("info_matrix: sigma_w must be > 0");
  if (!(c_delta > 0.0)) throw DomainError("info_matrix: c_delta must be > 0");

  InfoMatrix info;
  info.sigma_w = sigma_w;
  info.c_delta = c_delta;
  info.sample_count = data.size();
  if (data.size() == 0) {
    info.D = matkit::SymMatrix::zero(1);
    return info;
  }
  const int nx = static_cast<int>(data.x[0].size());
  const int nu = static_cast<int>(data.u[0].size());
  MatrixXd sum = MatrixXd::Zero(nx + nu, nx + nu);
  VectorXd phi(nx + nu);
  for (int k = 0; k < data.size(); ++k) {
    phi.head(nx) = data.x[k];
    phi.tail(nu) = data.u[k];
    sum += phi * phi.transpose();
  }
  info.D = matkit::SymMatrix(sum / (sigma_w * sigma_w * c_delta));
  return info;
}

InfoMatrix accumulate(const InfoMatrix& base, const DataSet& extra) {
  InfoMatrix add = info_matrix(extra, base.sigma_w, base.c_delta);
  InfoMatrix out;
  out.sigma_w = base.sigma_w;
  out.c_delta = base.c_delta;
  out.sample_count = base.sample_count + add.sample_count;
  out.D = matkit::SymMatrix(base.D.mat() + add.D.mat());
  return out;
}

bool in_credibility_region(const MatrixXd& cand_A, const MatrixXd& cand_B,
                           const Estimate& est, const InfoMatrix& info) {
  if (cand_A.rows() != est.A_hat.rows() || cand_A.cols() != est.A_hat.cols() ||
      cand_B.rows() != est.B_hat.rows() || cand_B.cols() != est.B_hat.cols()) {
    throw DimensionMismatch("in_credibility_region: candidate shapes");
  }
  if (!matkit::is_definite(info.D, matkit::Definite::Pos, 0.0)) {
    throw SingularInfo("information matrix is not positive definite");
  }
  const int nx = static_cast<int>(cand_A.rows());
  const int nu = static_cast<int>(cand_B.cols());
  MatrixXd err(nx + nu, nx);  // [(A_hat - A)'; (B_hat - B)']
  err.topRows(nx) = (est.A_hat - cand_A).transpose();
  err.bottomRows(nu) = (est.B_hat - cand_B).transpose();
  const MatrixXd q = err.transpose() * info.D.mat() * err;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (q + q.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() <= 1.0 + 1e-9;
}

std::string estimate_to_json(const Estimate& est, const InfoMatrix& info) {
  detail::json j;
  j["A_hat"] = detail::matrix_to_json(est.A_hat);
  j["B_hat"] = detail::matrix_to_json(est.B_hat);
  j["dims"] = {{"nx", est.A_hat.rows()}, {"nu", est.B_hat.cols()}};
  j["info"] = {{"D", detail::matrix_to_json(info.D.mat())},
               {"c_delta", info.c_delta},
               {"sigma_w", info.sigma_w},
               {"sample_count", info.sample_count}};
  return j.dump(2);
}

void estimate_from_json(const std::string& text, Estimate& est,
                        InfoMatrix& info) {
  detail::json j = detail::json::parse(text);
  est.A_hat = detail::matrix_from_json(j.at("A_hat"), "A_hat");
  est.B_hat = detail::matrix_from_json(j.at("B_hat"), "B_hat");
  const auto& ji = j.at("info");
  info.D = matkit::SymMatrix(detail::matrix_from_json(ji.at("D"), "info.D"));
  info.c_delta = ji.at("c_delta").get<double>();
  info.sigma_w = ji.at("sigma_w").get<double>();
  info.sample_count = ji.at("sample_count").get<int>();
}

}  // namespace dualgs::estimate
