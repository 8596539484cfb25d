#include "cogrisk/calibration.hpp"

#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "cogrisk/error.hpp"
#include "cogrisk/rng.hpp"

namespace cogrisk {

namespace {

double* parameter_slot(EnvConfig& c, const std::string& name) {
  if (name == "v0") return &c.sfm.v0;
  if (name == "tau") return &c.sfm.tau;
  if (name == "a_veh") return &c.sfm.a_veh;
  if (name == "b_veh") return &c.sfm.b_veh;
  if (name == "a_ped") return &c.sfm.a_ped;
  if (name == "b_ped") return &c.sfm.b_ped;
  if (name == "gamma1") return &c.risk.gamma1;
  if (name == "gamma2") return &c.risk.gamma2;
  if (name == "lambda1") return &c.risk.lambda1;
  if (name == "lambda2") return &c.risk.lambda2;
  if (name == "lambda3") return &c.risk.lambda3;
  throw ValidationError("unknown calibration parameter '" + name + "'");
}

}  // namespace

const std::vector<std::string>& calibratable_parameters() {
  static const std::vector<std::string> names = {"v0",     "tau",    "a_veh",   "b_veh",
                                                 "a_ped",  "b_ped",  "gamma1",  "gamma2",
                                                 "lambda1", "lambda2", "lambda3"};
  return names;
}

double get_parameter(const EnvConfig& config, const std::string& name) {
  return *parameter_slot(const_cast<EnvConfig&>(config), name);
}

void set_parameter(EnvConfig& config, const std::string& name, double value) {
  *parameter_slot(config, name) = value;
}

void validate(const CalibrationSpec& spec) {
  if (spec.budget < 1) throw ValidationError("calibration budget must be >= 1");
  for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
    const ParameterBox& b = spec.boxes[i];
    EnvConfig probe;
    parameter_slot(probe, b.name);
    if (!std::isfinite(b.min) || !std::isfinite(b.max) || !(b.min <= b.max)) {
      throw ValidationError("calibration box for " + b.name + " is empty");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (spec.boxes[j].name == b.name) throw ValidationError("duplicate calibration box " + b.name);
    }
  }
}

TruthEpisode truth_from_table(const TrajectoryTable& table, const IngestOptions& options) {
  return {scenario_from_trajectories(table, options), table};
}

TruthEpisode simulate_truth(const Scenario& scenario, const EnvConfig& env_config, Policy& policy,
                            std::uint64_t episode_seed) {
  Environment env(env_config);
  const EpisodeLog log = run_episode(env, scenario, policy, episode_seed);
  TruthEpisode truth;
  truth.table = trajectory_table(log);
  truth.scenario = scenario;
  // The recorded initial state may differ from the template (reset jitter).
  for (std::size_t i = 0; i < truth.scenario.agents.size(); ++i) {
    AgentState& a = truth.scenario.agents[i];
    const AgentRecord& r = log.steps.front().agents[i];
    a.position = r.position;
    a.velocity = r.velocity;
    a.speed = r.speed;
    a.heading = r.heading;
  }
  truth.scenario.replay.clear();
  return truth;
}

Scenario focus_scenario(const TruthEpisode& truth, int focus, PedestrianModel model) {
  const Scenario& base = truth.scenario;
  if (focus <= 0 || focus >= static_cast<int>(base.agents.size())) {
    throw ValidationError("focus agent must be a pedestrian of the scenario");
  }
  Scenario s = base;
  s.model = model;
  s.max_steps = std::max(1, static_cast<int>(truth.table.times.size()) - 1);
  s.replay.assign(s.agents.size(), {});
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    if (static_cast<int>(i) != focus) s.replay[i] = truth.table.tracks[i];
  }
  return s;
}

std::vector<FocusResult> evaluate_focus(const std::vector<TruthEpisode>& truth, PedestrianModel model,
                                        const EnvConfig& env_config) {
  EnvConfig cfg = env_config;
  cfg.jitter_position = 0.0;
  cfg.jitter_speed = 0.0;
  cfg.pedestrian_noise = 0.0;
  Environment env(cfg);
  ZeroPolicy hold;
  std::vector<FocusResult> out;
  for (const TruthEpisode& t : truth) {
    for (int focus = 1; focus < static_cast<int>(t.scenario.agents.size()); ++focus) {
      const Scenario s = focus_scenario(t, focus, model);
      FocusResult r;
      r.focus = focus;
      r.log = run_episode(env, s, hold, s.seed);
      Trajectory truth_track;
      for (const ReplaySample& p : t.table.tracks[focus]) truth_track.push_back(p.position);
      const Trajectory sim = agent_trajectory(r.log, focus);
      r.ade = ade(sim, truth_track);
      r.fde = fde(sim, truth_track);
      for (const StepRecord& step : r.log.steps) {
        for (const auto& [i, j] : step.collisions) r.collided |= (i == focus || j == focus);
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

double mean_focus_ade(const std::vector<TruthEpisode>& truth, PedestrianModel model,
                      const EnvConfig& env_config) {
  const std::vector<FocusResult> results = evaluate_focus(truth, model, env_config);
  if (results.empty()) throw ValidationError("no pedestrians to evaluate in the truth set");
  double sum = 0.0;
  for (const FocusResult& r : results) sum += r.ade;
  return sum / static_cast<double>(results.size());
}

CalibrationResult calibrate(const CalibrationSpec& spec, const std::vector<TruthEpisode>& truth,
                            const EnvConfig& base_config) {
  validate(spec);
  if (truth.empty()) throw ValidationError("calibration needs at least one truth episode");
  Rng rng = make_rng(spec.seed, "calibration");
  CalibrationResult result;
  result.best_ade = std::numeric_limits<double>::infinity();
  for (int k = 0; k < spec.budget; ++k) {
    EnvConfig cfg = base_config;
    CalibrationTrial trial;
    trial.index = k;
    for (const ParameterBox& b : spec.boxes) {
      const double v = std::uniform_real_distribution<double>(b.min, b.max)(rng);
      set_parameter(cfg, b.name, v);
      trial.values.push_back(v);
    }
    trial.ade = mean_focus_ade(truth, spec.model, cfg);
    if (trial.ade < result.best_ade) {
      result.best_ade = trial.ade;
      result.best_values = trial.values;
      result.best_config = cfg;
      result.best_trial = k;
    }
    trial.best_ade = result.best_ade;
    result.trials.push_back(std::move(trial));
  }
  return result;
}

std::string calibration_trials_csv(const CalibrationSpec& spec, const CalibrationResult& result) {
  std::ostringstream os;
  os << "trial";
  for (const ParameterBox& b : spec.boxes) os << ',' << b.name;
  os << ",ade,best_ade\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const CalibrationTrial& t : result.trials) {
    os << t.index;
    for (double v : t.values) os << ',' << num(v);
    os << ',' << num(t.ade) << ',' << num(t.best_ade) << '\n';
  }
  return os.str();
}

}  // namespace cogrisk
