#include "dualgs/plant.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace dualgs::plant {

void LtiSystem::validate() const {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw DimensionMismatch("LtiSystem: A must be square and B row-compatible");
  }
  if (!(sigma_w > 0.0)) {
    throw DomainError("LtiSystem: sigma_w must be > 0");
  }
}

void PerfChannel::validate(int nx, int nu) const {
  const int z = nz();
  if (C.cols() != nx || D.rows() != z || D.cols() != nu || Dw.rows() != z ||
      Dw.cols() != nx) {
    throw DimensionMismatch("PerfChannel: C/D/Dw shapes inconsistent");
  }
  if (Qp.rows() != nx || Qp.cols() != nx || Sp.rows() != nx || Sp.cols() != z ||
      Rp.rows() != z || Rp.cols() != z) {
    throw DimensionMismatch("PerfChannel: Qp/Sp/Rp shapes inconsistent");
  }
  if (!matkit::is_definite(matkit::SymMatrix(Rp), matkit::Definite::Pos, 0.0)) {
    throw DomainError("PerfChannel: Rp must be positive definite");
  }
}

PerfChannel PerfChannel::l2_gain(double gamma, int nx, int nu) {
  return l2_gain(gamma, MatrixXd::Identity(nx, nx), MatrixXd::Zero(nx, nu),
                 MatrixXd::Zero(nx, nx));
}

PerfChannel PerfChannel::l2_gain(double gamma, const MatrixXd& C,
                                 const MatrixXd& D, const MatrixXd& Dw) {
  if (!(gamma > 0.0)) throw DomainError("l2_gain: gamma must be > 0");
  PerfChannel pc;
  pc.C = C;
  pc.D = D;
  pc.Dw = Dw;
  const int nx = static_cast<int>(C.cols());
  const int nz = static_cast<int>(C.rows());
  pc.Qp = -gamma * MatrixXd::Identity(nx, nx);
  pc.Sp = MatrixXd::Zero(nx, nz);
  pc.Rp = (1.0 / gamma) * MatrixXd::Identity(nz, nz);
  return pc;
}

Policy Policy::feedback(const MatrixXd& K) {
  Policy p;
  p.K = K;
  p.Sigma = MatrixXd::Zero(K.rows(), K.rows());
  return p;
}

namespace {

void check_policy(const LtiSystem& sys, const Policy& policy,
                  const VectorXd& x0) {
  if (policy.K.rows() != sys.nu() || policy.K.cols() != sys.nx() ||
      policy.Sigma.rows() != sys.nu() || policy.Sigma.cols() != sys.nu() ||
      x0.size() != sys.nx()) {
    throw DimensionMismatch("simulate: policy/x0 dimensions do not match");
  }
}

}  // namespace

Trajectory simulate(const LtiSystem& sys, const Policy& policy,
                    const VectorXd& x0, int horizon, RngStream& rng) {
  sys.validate();
  check_policy(sys, policy, x0);
  if (horizon < 1) throw DomainError("simulate: horizon must be >= 1");

  const matkit::SymMatrix sigma(policy.Sigma);
  const matkit::SymMatrix noise_cov(sys.sigma_w * sys.sigma_w *
                                    MatrixXd::Identity(sys.nx(), sys.nx()));
  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.inputs.reserve(horizon);
  traj.noises.reserve(horizon);
  traj.states.push_back(x0);
  VectorXd x = x0;
  for (int k = 0; k < horizon; ++k) {
    const VectorXd e = matkit::gaussian_sample(sigma, rng);
    const VectorXd w = matkit::gaussian_sample(noise_cov, rng);
    const VectorXd u = policy.K * x + e;
    x = sys.A * x + sys.B * u + w;
    traj.inputs.push_back(u);
    traj.noises.push_back(w);
    traj.states.push_back(x);
  }
  return traj;
}

Trajectory simulate_with_noise(const LtiSystem& sys, const Policy& policy,
                               const VectorXd& x0,
                               const std::vector<VectorXd>& noises,
                               RngStream* excitation_rng) {
  check_policy(sys, policy, x0);
  if (noises.empty()) throw DomainError("simulate_with_noise: empty noises");

  const matkit::SymMatrix sigma(policy.Sigma);
  Trajectory traj;
  traj.states.push_back(x0);
  VectorXd x = x0;
  for (const VectorXd& w : noises) {
    if (w.size() != sys.nx()) {
      throw DimensionMismatch("simulate_with_noise: noise dimension");
    }
    VectorXd u = policy.K * x;
    if (excitation_rng != nullptr) {
      u += matkit::gaussian_sample(sigma, *excitation_rng);
    }
    x = sys.A * x + sys.B * u + w;
    traj.inputs.push_back(u);
    traj.noises.push_back(w);
    traj.states.push_back(x);
  }
  return traj;
}

VectorXd perf_output(const PerfChannel& pc, const VectorXd& x,
                     const VectorXd& u, const VectorXd& w) {
  if (x.size() != pc.C.cols() || u.size() != pc.D.cols() ||
      w.size() != pc.Dw.cols()) {
    throw DimensionMismatch("perf_output: x/u/w shapes");
  }
  return pc.C * x + pc.D * u + pc.Dw * w;
}

void fill_perf_outputs(const PerfChannel& pc, Trajectory& traj) {
  traj.perf_outputs.clear();
  traj.perf_outputs.reserve(traj.horizon());
  for (int k = 0; k < traj.horizon(); ++k) {
    traj.perf_outputs.push_back(
        perf_output(pc, traj.states[k], traj.inputs[k], traj.noises[k]));
  }
}

QuadPerfSums quad_perf_lhs(const PerfChannel& pc, const Trajectory& traj) {
  if (traj.horizon() == 0) throw DomainError("quad_perf_lhs: empty trajectory");
  QuadPerfSums sums;
  for (int k = 0; k < traj.horizon(); ++k) {
    const VectorXd& w = traj.noises[k];
    const VectorXd z =
        (static_cast<int>(traj.perf_outputs.size()) == traj.horizon())
            ? traj.perf_outputs[k]
            : perf_output(pc, traj.states[k], traj.inputs[k], w);
    sums.s_wz += w.dot(pc.Qp * w) + 2.0 * w.dot(pc.Sp * z) + z.dot(pc.Rp * z);
    sums.s_ww += w.squaredNorm();
  }
  return sums;
}

double empirical_l2_gain(const PerfChannel& pc,
                         const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw DomainError("empirical_l2_gain: no data");
  double worst = -1.0;
  for (const Trajectory& traj : trajectories) {
    double zz = 0.0, ww = 0.0;
    for (int k = 0; k < traj.horizon(); ++k) {
      const VectorXd z =
          (static_cast<int>(traj.perf_outputs.size()) == traj.horizon())
              ? traj.perf_outputs[k]
              : perf_output(pc, traj.states[k], traj.inputs[k],
                            traj.noises[k]);
      zz += z.squaredNorm();
      ww += traj.noises[k].squaredNorm();
    }
    if (ww > 0.0) worst = std::max(worst, std::sqrt(zz / ww));
  }
  if (worst < 0.0) {
    throw ZeroDisturbance("no trajectory has nonzero disturbance energy");
  }
  return worst;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorFamily::Generic, "cannot open " + path);

  const int nx = static_cast<int>(traj.states.front().size());
  const int nu = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs[0].size());
  const int nz = traj.perf_outputs.empty()
                     ? 0
                     : static_cast<int>(traj.perf_outputs[0].size());
  out << "k";
  for (int i = 0; i < nx; ++i) out << ",x" << i;
  for (int i = 0; i < nu; ++i) out << ",u" << i;
  for (int i = 0; i < nx; ++i) out << ",w" << i;
  for (int i = 0; i < nz; ++i) out << ",z" << i;
  out << "\n";

  char buf[32];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  const int h = traj.horizon();
  for (int k = 0; k <= h; ++k) {
    out << k;
    for (int i = 0; i < nx; ++i) cell(traj.states[k](i));
    if (k < h) {
      for (int i = 0; i < nu; ++i) cell(traj.inputs[k](i));
      for (int i = 0; i < nx; ++i) cell(traj.noises[k](i));
      for (int i = 0; i < nz; ++i) cell(traj.perf_outputs[k](i));
    } else {
      for (int i = 0; i < nu + nx + nz; ++i) out << ',';
    }
    out << "\n";
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorFamily::Generic, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorFamily::Generic, "empty trajectory file " + path);
  }
  // Header layout is k, x..., u..., w..., z...; w has nx columns.
  int nx = 0, nu = 0, nz = 0;
  for (const std::string& h : split_csv_line(line)) {
    if (h.size() >= 2 && h[0] == 'x') ++nx;
    if (h.size() >= 2 && h[0] == 'u') ++nu;
    if (h.size() >= 2 && h[0] == 'z') ++nz;
  }

  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    VectorXd x(nx);
    for (int i = 0; i < nx; ++i) x(i) = std::stod(cells.at(1 + i));
    traj.states.push_back(x);
    if (cells.size() > static_cast<std::size_t>(1 + nx) &&
        !cells[1 + nx].empty()) {
      VectorXd u(nu), w(nx);
      for (int i = 0; i < nu; ++i) u(i) = std::stod(cells.at(1 + nx + i));
      for (int i = 0; i < nx; ++i) w(i) = std::stod(cells.at(1 + nx + nu + i));
      traj.inputs.push_back(u);
      traj.noises.push_back(w);
      if (nz > 0) {
        VectorXd z(nz);
        for (int i = 0; i < nz; ++i) {
          z(i) = std::stod(cells.at(1 + 2 * nx + nu + i));
        }
        traj.perf_outputs.push_back(z);
      }
    }
  }
  return traj;
}

}  // namespace dualgs::plant
