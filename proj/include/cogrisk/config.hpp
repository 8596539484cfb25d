#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogrisk/calibration.hpp"
#include "cogrisk/env.hpp"
#include "cogrisk/policy.hpp"
#include "cogrisk/sac.hpp"
#include "cogrisk/scenarios.hpp"

namespace cogrisk {

struct CalibrationSettings {
  PedestrianModel model = PedestrianModel::kCrSfm;
  int budget = 200;
  // Kept in name order, the order a config file's box object is read back in.
  std::vector<ParameterBox> boxes = {{"a_ped", 1.0, 3.0}, {"a_veh", 1.0, 5.0}, {"b_ped", 0.4, 1.2},
                                     {"b_veh", 1.0, 3.0}, {"tau", 0.3, 1.0},   {"v0", 1.0, 1.8}};
};

struct EvalSettings {
  std::string policy = "scripted";  // scripted, zero, or sac
  int episodes_per_scenario = 1;
  bool deterministic = true;        // SAC policy acts with its mean action
};

// Everything the command line needs; every field has a default.
struct ToolkitConfig {
  EnvConfig env;
  SacConfig sac;
  ScriptedPolicyParams scripted;
  GeneratorConfig generator;
  CalibrationSettings calibration;
  EvalSettings eval;
};

void validate(const ToolkitConfig& config);

nlohmann::json config_to_json(const ToolkitConfig& config);
// Missing fields keep their defaults; unknown fields are rejected.
ToolkitConfig config_from_json(const nlohmann::json& j);
ToolkitConfig load_config(const std::filesystem::path& path);

}  // namespace cogrisk
