#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cogrisk/env.hpp"

namespace cogrisk {

enum class ScenarioTemplate {
  kCrossing,        // AV on a straight approach, 1-3 crossing pedestrians
  kSingleCrossing,  // one fixed AV/pedestrian crossing geometry
  kCollision,       // simulated pedestrian catches up with a slower replayed walker
  kLatentRisk,      // simulated pedestrian crosses the path of an erratic replayed walker
};

std::string to_string(ScenarioTemplate t);
ScenarioTemplate parse_scenario_template(const std::string& name);

struct GeneratorConfig {
  ScenarioTemplate scenario_template = ScenarioTemplate::kCrossing;
  PedestrianModel model = PedestrianModel::kCrSfm;
  int min_pedestrians = 1;
  int max_pedestrians = 3;
  int max_steps = 60;
  double dt = kDefaultDt;
  double train_fraction = 0.77;
};

void validate(const GeneratorConfig& config);

// Scenario k is drawn from its own substream, so a prefix of a larger set
// equals a smaller set with the same seed.
std::vector<Scenario> generate_scenarios(int count, std::uint64_t seed,
                                         const GeneratorConfig& config);

Scenario single_crossing_scenario(PedestrianModel model = PedestrianModel::kCrSfm);

// First round(fraction * n) scenarios train, the rest test.
std::pair<std::vector<Scenario>, std::vector<Scenario>> split_scenarios(
    const std::vector<Scenario>& scenarios, double train_fraction);

}  // namespace cogrisk
