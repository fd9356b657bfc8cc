#pragma once

#include <cstdint>
#include <string>

#include "dualgs/plant.hpp"
#include "dualgs/synthesis.hpp"
#include "dualgs/validate.hpp"

namespace dualgs::config {

// One scenario: the hidden ground truth for simulation, the performance and
// exploration-cost specification, data lengths, hyperparameter grids, seeds,
// and validation settings. Parsed from a JSON file; every constraint failure
// raises ConfigError naming the offending field.
struct ScenarioConfig {
  plant::LtiSystem system;      // ground truth, held only by the simulator
  plant::PerfChannel perf;      // expanded from gamma shorthand if given
  Eigen::MatrixXd Q;            // exploration cost weights
  Eigen::MatrixXd R;
  double delta = 0.1;
  int n0 = 200;
  int T_explore = 1000;
  double initial_input_std = 1.0;
  synthesis::HyperGrids grids;  // absolute t_e values
  std::uint64_t seed = 0;
  int jobs = 1;
  validate::ValidationConfig validation;

  synthesis::PipelineConfig pipeline() const;
};

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

// --grid-override KEY=CSV, e.g. "eps=0.5,1". Keys: eps, t_e, lambda_s,
// lambda_u (t_e values are absolute).
void apply_grid_override(ScenarioConfig& cfg, const std::string& spec);

// Normalized echo of the configuration (deterministic key order).
std::string scenario_to_json(const ScenarioConfig& cfg);

}  // namespace dualgs::config
