#include "cogrisk/config.hpp"

#include "cogrisk/error.hpp"
#include "cogrisk/io.hpp"
#include "json_fields.hpp"

namespace cogrisk {

using nlohmann::json;
using detail::JsonObject;

void validate(const ToolkitConfig& c) {
  Environment probe(c.env);  // validates every environment section
  validate(c.sac);
  validate(c.generator);
  CalibrationSpec spec;
  spec.boxes = c.calibration.boxes;
  spec.budget = c.calibration.budget;
  validate(spec);
  const ScriptedPolicyParams& s = c.scripted;
  if (!(s.cruise_speed > 0.0 && s.cruise_speed <= kAvMaxSpeed)) {
    throw ValidationError("scripted_policy.cruise_speed must be in (0, 6]");
  }
  if (!(s.heading_gain >= 0.0) || !(s.corridor_length >= 0.0) || !(s.corridor_half_width >= 0.0) ||
      !(s.stop_margin >= 0.0)) {
    throw ValidationError("scripted_policy fields must be >= 0");
  }
  if (c.eval.policy != "scripted" && c.eval.policy != "zero" && c.eval.policy != "sac") {
    throw ValidationError("evaluation.policy must be scripted, zero or sac");
  }
  if (c.eval.episodes_per_scenario <= 0) {
    throw ValidationError("evaluation.episodes_per_scenario must be > 0");
  }
}

json config_to_json(const ToolkitConfig& c) {
  const EnvConfig& e = c.env;
  json boxes = json::object();
  for (const ParameterBox& b : c.calibration.boxes) boxes[b.name] = {b.min, b.max};
  return {
      {"environment",
       {{"goal_radius", e.goal_radius},
        {"graph_mode", to_string(e.graph_mode)},
        {"jitter_position", e.jitter_position},
        {"jitter_speed", e.jitter_speed},
        {"pedestrian_noise", e.pedestrian_noise},
        {"sfm",
         {{"v0", e.sfm.v0},
          {"tau", e.sfm.tau},
          {"a_veh", e.sfm.a_veh},
          {"b_veh", e.sfm.b_veh},
          {"a_ped", e.sfm.a_ped},
          {"b_ped", e.sfm.b_ped}}},
        {"risk",
         {{"gamma1", e.risk.gamma1},
          {"gamma2", e.risk.gamma2},
          {"lambda1", e.risk.lambda1},
          {"lambda2", e.risk.lambda2},
          {"lambda3", e.risk.lambda3},
          {"lambda_adj", e.risk.lambda_adj}}},
        {"cognition",
         {{"sigma_obs_sq", e.cognition.sigma_obs_sq},
          {"process_noise_sq", e.cognition.process_noise_sq},
          {"sigma_init_sq", e.cognition.sigma_init_sq}}},
        {"reward",
         {{"w_progress", e.reward.w_progress},
          {"r_success", e.reward.r_success},
          {"r_collision", e.reward.r_collision},
          {"w_step", e.reward.w_step},
          {"w_jerk", e.reward.w_jerk}}}}},
      {"sac",
       {{"variant", to_string(c.sac.variant)},
        {"gamma", c.sac.gamma},
        {"tau", c.sac.tau},
        {"alpha", c.sac.alpha},
        {"batch_size", c.sac.batch_size},
        {"actor_lr", c.sac.actor_lr},
        {"critic_lr", c.sac.critic_lr},
        {"buffer_capacity", c.sac.buffer_capacity},
        {"warmup", c.sac.warmup},
        {"updates_per_step", c.sac.updates_per_step},
        {"episodes", c.sac.episodes},
        {"accel_bound", c.sac.action_bounds.x()},
        {"dheading_bound", c.sac.action_bounds.y()},
        {"eval_interval", c.sac.eval_interval},
        {"eval_episodes", c.sac.eval_episodes},
        {"network",
         {{"gcn_hidden", c.sac.network.gcn_hidden},
          {"mlp_hidden", c.sac.network.mlp_hidden},
          {"max_agents", c.sac.network.max_agents},
          {"log_std_min", c.sac.network.log_std_min},
          {"log_std_max", c.sac.network.log_std_max}}}}},
      {"scripted_policy",
       {{"cruise_speed", c.scripted.cruise_speed},
        {"heading_gain", c.scripted.heading_gain},
        {"corridor_length", c.scripted.corridor_length},
        {"corridor_half_width", c.scripted.corridor_half_width},
        {"stop_margin", c.scripted.stop_margin}}},
      {"generator",
       {{"template", to_string(c.generator.scenario_template)},
        {"pedestrian_model", to_string(c.generator.model)},
        {"min_pedestrians", c.generator.min_pedestrians},
        {"max_pedestrians", c.generator.max_pedestrians},
        {"max_steps", c.generator.max_steps},
        {"dt", c.generator.dt},
        {"train_fraction", c.generator.train_fraction}}},
      {"calibration",
       {{"pedestrian_model", to_string(c.calibration.model)},
        {"budget", c.calibration.budget},
        {"boxes", std::move(boxes)}}},
      {"evaluation",
       {{"policy", c.eval.policy},
        {"episodes_per_scenario", c.eval.episodes_per_scenario},
        {"deterministic", c.eval.deterministic}}}};
}

namespace {

template <typename Fn>
void section(JsonObject& parent, const std::string& key, Fn fn) {
  if (!parent.has(key)) return;
  JsonObject child(parent.at(key), parent.path(key));
  fn(child);
  child.finish();
}

}  // namespace

ToolkitConfig config_from_json(const json& j) {
  ToolkitConfig c;
  JsonObject root(j, "config");
  section(root, "environment", [&](JsonObject& o) {
    EnvConfig& e = c.env;
    o.read("goal_radius", e.goal_radius);
    if (o.has("graph_mode")) e.graph_mode = parse_graph_mode(o.require<std::string>("graph_mode"));
    o.read("jitter_position", e.jitter_position);
    o.read("jitter_speed", e.jitter_speed);
    o.read("pedestrian_noise", e.pedestrian_noise);
    section(o, "sfm", [&](JsonObject& s) {
      s.read("v0", e.sfm.v0);
      s.read("tau", e.sfm.tau);
      s.read("a_veh", e.sfm.a_veh);
      s.read("b_veh", e.sfm.b_veh);
      s.read("a_ped", e.sfm.a_ped);
      s.read("b_ped", e.sfm.b_ped);
    });
    section(o, "risk", [&](JsonObject& r) {
      r.read("gamma1", e.risk.gamma1);
      r.read("gamma2", e.risk.gamma2);
      r.read("lambda1", e.risk.lambda1);
      r.read("lambda2", e.risk.lambda2);
      r.read("lambda3", e.risk.lambda3);
      r.read("lambda_adj", e.risk.lambda_adj);
    });
    section(o, "cognition", [&](JsonObject& g) {
      g.read("sigma_obs_sq", e.cognition.sigma_obs_sq);
      g.read("process_noise_sq", e.cognition.process_noise_sq);
      g.read("sigma_init_sq", e.cognition.sigma_init_sq);
    });
    section(o, "reward", [&](JsonObject& r) {
      r.read("w_progress", e.reward.w_progress);
      r.read("r_success", e.reward.r_success);
      r.read("r_collision", e.reward.r_collision);
      r.read("w_step", e.reward.w_step);
      r.read("w_jerk", e.reward.w_jerk);
    });
  });
  section(root, "sac", [&](JsonObject& o) {
    SacConfig& s = c.sac;
    if (o.has("variant")) s.variant = parse_sac_variant(o.require<std::string>("variant"));
    o.read("gamma", s.gamma);
    o.read("tau", s.tau);
    o.read("alpha", s.alpha);
    o.read("batch_size", s.batch_size);
    o.read("actor_lr", s.actor_lr);
    o.read("critic_lr", s.critic_lr);
    o.read("buffer_capacity", s.buffer_capacity);
    o.read("warmup", s.warmup);
    o.read("updates_per_step", s.updates_per_step);
    o.read("episodes", s.episodes);
    o.read("accel_bound", s.action_bounds.x());
    o.read("dheading_bound", s.action_bounds.y());
    o.read("eval_interval", s.eval_interval);
    o.read("eval_episodes", s.eval_episodes);
    section(o, "network", [&](JsonObject& n) {
      n.read("gcn_hidden", s.network.gcn_hidden);
      n.read("mlp_hidden", s.network.mlp_hidden);
      n.read("max_agents", s.network.max_agents);
      n.read("log_std_min", s.network.log_std_min);
      n.read("log_std_max", s.network.log_std_max);
    });
  });
  section(root, "scripted_policy", [&](JsonObject& o) {
    o.read("cruise_speed", c.scripted.cruise_speed);
    o.read("heading_gain", c.scripted.heading_gain);
    o.read("corridor_length", c.scripted.corridor_length);
    o.read("corridor_half_width", c.scripted.corridor_half_width);
    o.read("stop_margin", c.scripted.stop_margin);
  });
  section(root, "generator", [&](JsonObject& o) {
    GeneratorConfig& g = c.generator;
    if (o.has("template")) g.scenario_template = parse_scenario_template(o.require<std::string>("template"));
    if (o.has("pedestrian_model")) g.model = parse_pedestrian_model(o.require<std::string>("pedestrian_model"));
    o.read("min_pedestrians", g.min_pedestrians);
    o.read("max_pedestrians", g.max_pedestrians);
    o.read("max_steps", g.max_steps);
    o.read("dt", g.dt);
    o.read("train_fraction", g.train_fraction);
  });
  section(root, "calibration", [&](JsonObject& o) {
    if (o.has("pedestrian_model")) {
      c.calibration.model = parse_pedestrian_model(o.require<std::string>("pedestrian_model"));
    }
    o.read("budget", c.calibration.budget);
    if (o.has("boxes")) {
      const json& boxes = o.at("boxes");
      if (!boxes.is_object()) throw ValidationError(o.path("boxes") + ": expected an object");
      c.calibration.boxes.clear();
      for (const auto& [name, range] : boxes.items()) {
        const std::string where = o.path("boxes") + "." + name;
        if (!range.is_array() || range.size() != 2) throw ValidationError(where + ": expected [min, max]");
        c.calibration.boxes.push_back({name, JsonObject::convert<double>(range[0], where),
                                       JsonObject::convert<double>(range[1], where)});
      }
    }
  });
  section(root, "evaluation", [&](JsonObject& o) {
    o.read("policy", c.eval.policy);
    o.read("episodes_per_scenario", c.eval.episodes_per_scenario);
    o.read("deterministic", c.eval.deterministic);
  });
  root.finish();
  validate(c);
  return c;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace cogrisk
