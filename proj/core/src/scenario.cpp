#include "dualgs/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace dualgs::config {

using detail::json;
using detail::matrix_from_json;
using detail::matrix_to_json;
using Eigen::MatrixXd;

namespace {

double require_number(const json& j, const char* field, double lo, double hi,
                      bool lo_strict, bool hi_strict) {
  if (!j.contains(field) || !j.at(field).is_number()) {
    throw ConfigError(std::string(field) + ": missing or not a number");
  }
  const double v = j.at(field).get<double>();
  const bool lo_ok = lo_strict ? v > lo : v >= lo;
  const bool hi_ok = hi_strict ? v < hi : v <= hi;
  if (!lo_ok || !hi_ok) {
    std::ostringstream os;
    os << field << ": value " << v << " outside " << (lo_strict ? "(" : "[")
       << lo << ", " << hi << (hi_strict ? ")" : "]");
    throw ConfigError(os.str());
  }
  return v;
}

std::vector<double> grid_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(std::string("grids.") + field +
                      ": expected non-empty array");
  }
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number() || !(v.get<double>() > 0.0)) {
      throw ConfigError(std::string("grids.") + field +
                        ": entries must be positive numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }

  ScenarioConfig cfg;

  if (!j.contains("system")) throw ConfigError("system: missing");
  const json& sys = j.at("system");
  cfg.system.A = matrix_from_json(sys.at("A"), "system.A");
  cfg.system.B = matrix_from_json(sys.at("B"), "system.B");
  cfg.system.sigma_w =
      require_number(sys, "sigma_w", 0.0, 1e12, true, false);
  try {
    cfg.system.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
  const int nx = cfg.system.nx();
  const int nu = cfg.system.nu();

  if (!j.contains("performance")) throw ConfigError("performance: missing");
  const json& perf = j.at("performance");
  if (perf.contains("gamma")) {
    const double gamma =
        require_number(perf, "gamma", 0.0, 1e12, true, false);
    if (perf.contains("C")) {
      cfg.perf = plant::PerfChannel::l2_gain(
          gamma, matrix_from_json(perf.at("C"), "performance.C"),
          matrix_from_json(perf.at("D"), "performance.D"),
          matrix_from_json(perf.at("Dw"), "performance.Dw"));
    } else {
      cfg.perf = plant::PerfChannel::l2_gain(gamma, nx, nu);
    }
  } else {
    cfg.perf.C = matrix_from_json(perf.at("C"), "performance.C");
    cfg.perf.D = matrix_from_json(perf.at("D"), "performance.D");
    cfg.perf.Dw = matrix_from_json(perf.at("Dw"), "performance.Dw");
    cfg.perf.Qp = matrix_from_json(perf.at("Qp"), "performance.Qp");
    cfg.perf.Sp = matrix_from_json(perf.at("Sp"), "performance.Sp");
    cfg.perf.Rp = matrix_from_json(perf.at("Rp"), "performance.Rp");
  }
  try {
    cfg.perf.validate(nx, nu);
  } catch (const Error& e) {
    throw ConfigError(std::string("performance: ") + e.what());
  }

  if (j.contains("exploration_cost")) {
    const json& cost = j.at("exploration_cost");
    cfg.Q = matrix_from_json(cost.at("Q"), "exploration_cost.Q");
    cfg.R = matrix_from_json(cost.at("R"), "exploration_cost.R");
  } else {
    cfg.Q = MatrixXd::Identity(nx, nx);
    cfg.R = MatrixXd::Identity(nu, nu);
  }

  cfg.delta = require_number(j, "delta", 0.0, 1.0, true, true);
  cfg.n0 = static_cast<int>(require_number(j, "n0", 1.0, 1e9, false, false));
  cfg.T_explore =
      static_cast<int>(require_number(j, "T", 1.0, 1e9, false, false));
  if (j.contains("initial_input_std")) {
    cfg.initial_input_std =
        require_number(j, "initial_input_std", 0.0, 1e12, true, false);
  }

  const double sw2 = cfg.system.sigma_w * cfg.system.sigma_w;
  cfg.grids.eps = {0.25, 0.5, 1.0, 2.0, 4.0};
  cfg.grids.t_e = {0.1 * sw2, 0.3 * sw2, 1.0 * sw2, 3.0 * sw2};
  cfg.grids.lambda_s = {1e-2, 1e-1, 1.0, 1e1, 1e2};
  cfg.grids.lambda_u = {1e-2, 1e-1, 1.0, 1e1, 1e2};
  if (j.contains("grids")) {
    const json& g = j.at("grids");
    if (g.contains("eps")) cfg.grids.eps = grid_from_json(g.at("eps"), "eps");
    if (g.contains("t_e")) cfg.grids.t_e = grid_from_json(g.at("t_e"), "t_e");
    if (g.contains("t_e_over_sigma_w2")) {
      cfg.grids.t_e =
          grid_from_json(g.at("t_e_over_sigma_w2"), "t_e_over_sigma_w2");
      for (double& v : cfg.grids.t_e) v *= sw2;
    }
    if (g.contains("lambda_s")) {
      cfg.grids.lambda_s = grid_from_json(g.at("lambda_s"), "lambda_s");
    }
    if (g.contains("lambda_u")) {
      cfg.grids.lambda_u = grid_from_json(g.at("lambda_u"), "lambda_u");
    }
  }

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) {
      throw ConfigError("seed: must be a non-negative integer");
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("jobs")) {
    cfg.jobs = static_cast<int>(
        require_number(j, "jobs", 1.0, 4096.0, false, false));
  }

  cfg.validation.delta = cfg.delta;
  if (j.contains("validation")) {
    const json& v = j.at("validation");
    if (v.contains("n_trials")) {
      cfg.validation.n_trials = static_cast<int>(
          require_number(v, "n_trials", 1.0, 1e9, false, false));
    }
    if (v.contains("horizon")) {
      cfg.validation.horizon = static_cast<int>(
          require_number(v, "horizon", 2.0, 1e9, false, false));
    }
    if (v.contains("boundary_fraction")) {
      cfg.validation.boundary_fraction =
          require_number(v, "boundary_fraction", 0.0, 1.0, false, false);
    }
  }
  cfg.validation.seed = cfg.seed;
  cfg.validation.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

void apply_grid_override(ScenarioConfig& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("grid override must look like KEY=v1,v2,...: " + spec);
  }
  const std::string key = spec.substr(0, eq);
  std::vector<double> values;
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("grid override " + key + ": bad number '" + item + "'");
    }
    if (!(values.back() > 0.0)) {
      throw ConfigError("grid override " + key + ": values must be positive");
    }
  }
  if (values.empty()) throw ConfigError("grid override " + key + ": empty");

  if (key == "eps") {
    cfg.grids.eps = values;
  } else if (key == "t_e") {
    cfg.grids.t_e = values;
  } else if (key == "lambda_s") {
    cfg.grids.lambda_s = values;
  } else if (key == "lambda_u") {
    cfg.grids.lambda_u = values;
  } else {
    throw ConfigError("unknown grid override key: " + key);
  }
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["system"] = {{"A", matrix_to_json(cfg.system.A)},
                 {"B", matrix_to_json(cfg.system.B)},
                 {"sigma_w", cfg.system.sigma_w}};
  j["performance"] = {{"C", matrix_to_json(cfg.perf.C)},
                      {"D", matrix_to_json(cfg.perf.D)},
                      {"Dw", matrix_to_json(cfg.perf.Dw)},
                      {"Qp", matrix_to_json(cfg.perf.Qp)},
                      {"Sp", matrix_to_json(cfg.perf.Sp)},
                      {"Rp", matrix_to_json(cfg.perf.Rp)}};
  j["exploration_cost"] = {{"Q", matrix_to_json(cfg.Q)},
                           {"R", matrix_to_json(cfg.R)}};
  j["delta"] = cfg.delta;
  j["n0"] = cfg.n0;
  j["T"] = cfg.T_explore;
  j["initial_input_std"] = cfg.initial_input_std;
  j["grids"] = {{"eps", cfg.grids.eps},
                {"t_e", cfg.grids.t_e},
                {"lambda_s", cfg.grids.lambda_s},
                {"lambda_u", cfg.grids.lambda_u}};
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["validation"] = {{"n_trials", cfg.validation.n_trials},
                     {"horizon", cfg.validation.horizon},
                     {"boundary_fraction", cfg.validation.boundary_fraction}};
  return j.dump(2);
}

synthesis::PipelineConfig ScenarioConfig::pipeline() const {
  synthesis::PipelineConfig p;
  p.delta = delta;
  p.n0 = n0;
  p.T_explore = T_explore;
  p.initial_input_std = initial_input_std;
  p.perf = perf;
  p.Q = Q;
  p.R = R;
  p.grids = grids;
  p.k0_te_grid = grids.t_e;
  p.seed = seed;
  p.jobs = jobs;
  return p;
}

}  // namespace dualgs::config
