#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cogrisk/env.hpp"
#include "cogrisk/io.hpp"
#include "cogrisk/policy.hpp"

namespace cogrisk {

// Names accepted in parameter boxes: v0, tau, a_veh, b_veh, a_ped, b_ped,
// gamma1, gamma2, lambda1, lambda2, lambda3.
const std::vector<std::string>& calibratable_parameters();
double get_parameter(const EnvConfig& config, const std::string& name);
void set_parameter(EnvConfig& config, const std::string& name, double value);

struct ParameterBox {
  std::string name;
  double min = 0.0;
  double max = 0.0;
};

struct CalibrationSpec {
  PedestrianModel model = PedestrianModel::kCrSfm;
  std::vector<ParameterBox> boxes;
  int budget = 100;
  std::uint64_t seed = 0;
};

void validate(const CalibrationSpec& spec);

// A recorded episode: its initial scenario and the full tracks of every agent.
struct TruthEpisode {
  Scenario scenario;
  TrajectoryTable table;
};

TruthEpisode truth_from_table(const TrajectoryTable& table, const IngestOptions& options = {});

// Simulates every agent (pedestrians with `env_config`, the AV with `policy`)
// and keeps the resulting tracks.
TruthEpisode simulate_truth(const Scenario& scenario, const EnvConfig& env_config, Policy& policy,
                            std::uint64_t episode_seed);

// Scenario in which only `focus` is simulated and every other agent replays its record.
Scenario focus_scenario(const TruthEpisode& truth, int focus, PedestrianModel model);

struct FocusResult {
  int focus = 0;
  double ade = 0.0;
  double fde = 0.0;
  bool collided = false;
  EpisodeLog log;
};

// One ghost-replay run per pedestrian of every truth episode.
std::vector<FocusResult> evaluate_focus(const std::vector<TruthEpisode>& truth, PedestrianModel model,
                                        const EnvConfig& env_config);
double mean_focus_ade(const std::vector<TruthEpisode>& truth, PedestrianModel model,
                      const EnvConfig& env_config);

struct CalibrationTrial {
  int index = 0;
  std::vector<double> values;  // one per box, in box order
  double ade = 0.0;
  double best_ade = 0.0;       // best so far, including this trial
};

struct CalibrationResult {
  EnvConfig best_config;
  std::vector<double> best_values;
  double best_ade = 0.0;
  int best_trial = 0;
  std::vector<CalibrationTrial> trials;
};

// Seeded uniform random search over the boxes, scored by mean focus ADE.
CalibrationResult calibrate(const CalibrationSpec& spec, const std::vector<TruthEpisode>& truth,
                            const EnvConfig& base_config);

std::string calibration_trials_csv(const CalibrationSpec& spec, const CalibrationResult& result);

}  // namespace cogrisk
