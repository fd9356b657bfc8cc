#pragma once

#include <string>

#include "dualgs/scenario.hpp"

namespace dualgs::stages {

// Artifact names inside the output directory. Each stage reads the artifacts
// of its predecessors and writes its own; cmd_full chains the same functions,
// so the two paths produce identical files.
struct StagePaths {
  std::string dir;
  std::string estimate_json() const { return dir + "/estimate0.json"; }
  std::string initial_traj_csv() const { return dir + "/initial_traj.csv"; }
  std::string design_json() const { return dir + "/design.json"; }
  std::string solver_status_csv() const { return dir + "/solver_status.csv"; }
  std::string explore_traj_csv() const { return dir + "/explore_traj.csv"; }
  std::string final_json() const { return dir + "/final.json"; }
  std::string validation_json() const { return dir + "/validation.json"; }
  std::string validation_csv() const { return dir + "/validation.csv"; }
  std::string report_json() const { return dir + "/report.json"; }
};

// Each stage returns its one-line summary. Missing prerequisite artifacts
// raise StageDependencyError.
std::string run_estimate(const config::ScenarioConfig& cfg,
                         const std::string& out_dir);
std::string run_design(const config::ScenarioConfig& cfg,
                       const std::string& out_dir);
std::string run_explore(const config::ScenarioConfig& cfg,
                        const std::string& out_dir);
std::string run_validate(const config::ScenarioConfig& cfg,
                         const std::string& out_dir);
std::string run_full(const config::ScenarioConfig& cfg,
                     const std::string& out_dir);

// Serialization used by the stages and by tests.
std::string design_to_json(const synthesis::DualDesign& design,
                           const synthesis::RobustLqrResult& k0,
                           const std::vector<synthesis::GridPointStatus>& st);
void design_from_json(const std::string& text, synthesis::DualDesign& design,
                      synthesis::RobustLqrResult& k0);

}  // namespace dualgs::stages
