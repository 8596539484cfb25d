#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cogrisk/calibration.hpp"
#include "cogrisk/config.hpp"
#include "cogrisk/error.hpp"
#include "cogrisk/io.hpp"
#include "cogrisk/policy.hpp"
#include "cogrisk/render.hpp"
#include "cogrisk/sac.hpp"
#include "cogrisk/scenarios.hpp"

namespace fs = std::filesystem;
using namespace cogrisk;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool quiet = false;
};

ToolkitConfig effective_config(const Globals& g) {
  return g.config_path.empty() ? ToolkitConfig{} : load_config(g.config_path);
}

void say(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cout << line << '\n';
}

std::unique_ptr<SacAgent> load_agent(const ToolkitConfig& c, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ValidationError("policy 'sac' needs --checkpoint");
  auto agent = std::make_unique<SacAgent>(c.sac, 0);
  agent->load(checkpoint);
  return agent;
}

// Owns whatever the chosen policy needs to stay alive.
struct PolicyHolder {
  std::unique_ptr<SacAgent> agent;
  std::unique_ptr<Policy> policy;
};

PolicyHolder make_policy(const ToolkitConfig& c, const std::string& name, const std::string& checkpoint) {
  PolicyHolder h;
  if (name == "scripted") {
    h.policy = std::make_unique<ScriptedPolicy>(c.scripted);
  } else if (name == "zero") {
    h.policy = std::make_unique<ZeroPolicy>();
  } else if (name == "sac") {
    h.agent = load_agent(c, checkpoint);
    h.policy = std::make_unique<SacPolicy>(*h.agent, c.eval.deterministic);
  } else {
    throw ValidationError("unknown policy '" + name + "' (expected scripted, zero, sac)");
  }
  return h;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cognitive-risk pedestrian simulation and SAC driving toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (defaults apply to missing fields)");
  app.add_option("--seed", g.seed, "Master seed for every random stream");
  app.add_option("--out-dir", g.out_dir, "Directory for all outputs")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Only report errors");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic scenario set");
  int gen_count = 78;
  std::string gen_template, gen_model;
  bool gen_split = false;
  gen->add_option("--count", gen_count, "Number of scenarios")->capture_default_str();
  gen->add_option("--template", gen_template, "crossing, single-crossing, collision, latent-risk");
  gen->add_option("--model", gen_model, "Pedestrian model written into each scenario");
  gen->add_flag("--split", gen_split, "Write train/ and test/ using generator.train_fraction");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one scenario and write its episode log");
  std::string sim_scenario, sim_model, sim_policy = "scripted", sim_checkpoint;
  sim->add_option("--scenario", sim_scenario, "Scenario JSON file")->required();
  sim->add_option("--model", sim_model, "Override the scenario's pedestrian model");
  sim->add_option("--policy", sim_policy, "scripted, zero or sac")->capture_default_str();
  sim->add_option("--checkpoint", sim_checkpoint, "Checkpoint for --policy sac");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a SAC agent");
  std::string tr_scenarios, tr_variant;
  std::optional<int> tr_episodes;
  train_cmd->add_option("--scenarios", tr_scenarios, "Scenario file or directory")->required();
  train_cmd->add_option("--episodes", tr_episodes, "Override sac.episodes");
  train_cmd->add_option("--variant", tr_variant, "gcn-risk, gcn-uniform or flat");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy over a scenario set");
  std::string ev_scenarios, ev_policy, ev_checkpoint, ev_variant, ev_model;
  std::optional<int> ev_episodes;
  eval_cmd->add_option("--scenarios", ev_scenarios, "Scenario file or directory")->required();
  eval_cmd->add_option("--policy", ev_policy, "scripted, zero or sac (default: evaluation.policy)");
  eval_cmd->add_option("--checkpoint", ev_checkpoint, "Checkpoint for --policy sac");
  eval_cmd->add_option("--variant", ev_variant, "SAC variant the checkpoint was trained as");
  eval_cmd->add_option("--model", ev_model, "Override every scenario's pedestrian model");
  eval_cmd->add_option("--episodes-per-scenario", ev_episodes, "Override evaluation.episodes_per_scenario");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit pedestrian model parameters by random search");
  std::string cal_truth, cal_model;
  std::optional<int> cal_budget;
  cal->add_option("--truth", cal_truth, "Trajectory CSV file or directory of CSV files")->required();
  cal->add_option("--model", cal_model, "Pedestrian model to fit");
  cal->add_option("--budget", cal_budget, "Number of trials");

  // render
  auto* ren = app.add_subcommand("render", "Render an episode log as SVG");
  std::string ren_log, ren_output;
  RenderOptions ren_opt;
  ren->add_option("--log", ren_log, "Episode log (NDJSON)")->required();
  ren->add_option("--output", ren_output, "SVG path (default: <out-dir>/<log name>.svg)");
  ren->add_option("--width", ren_opt.width, "Width in px")->capture_default_str();
  ren->add_flag("--time-series", ren_opt.time_series, "Add AV speed/accel/heading panels");

  // ingest
  auto* ing = app.add_subcommand("ingest", "Turn a trajectory CSV into a scenario plus truth");
  std::string ing_csv, ing_id, ing_model;
  ing->add_option("--csv", ing_csv, "Trajectory CSV (t,agent_id,x,y,vx,vy)")->required();
  ing->add_option("--id", ing_id, "Scenario id (default: file stem)");
  ing->add_option("--model", ing_model, "Pedestrian model written into the scenario");

  // config
  auto* cfg_cmd = app.add_subcommand("config", "Write the effective config to <out-dir>/config.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    ToolkitConfig c = effective_config(g);
    const fs::path out(g.out_dir);

    if (gen->parsed()) {
      if (!gen_template.empty()) c.generator.scenario_template = parse_scenario_template(gen_template);
      if (!gen_model.empty()) c.generator.model = parse_pedestrian_model(gen_model);
      const auto scenarios = generate_scenarios(gen_count, g.seed, c.generator);
      if (gen_split) {
        const auto [train, test] = split_scenarios(scenarios, c.generator.train_fraction);
        for (const Scenario& s : train) write_scenario(out / "train" / (s.id + ".json"), s);
        for (const Scenario& s : test) write_scenario(out / "test" / (s.id + ".json"), s);
        say(g, "wrote " + std::to_string(train.size()) + " train / " + std::to_string(test.size()) +
                   " test scenarios to " + out.string());
      } else {
        for (const Scenario& s : scenarios) write_scenario(out / "scenarios" / (s.id + ".json"), s);
        say(g, "wrote " + std::to_string(scenarios.size()) + " scenarios to " + (out / "scenarios").string());
      }
    } else if (sim->parsed()) {
      Scenario s = read_scenario(sim_scenario);
      if (!sim_model.empty()) s.model = parse_pedestrian_model(sim_model);
      PolicyHolder p = make_policy(c, sim_policy, sim_checkpoint);
      Environment env(c.env);
      const EpisodeLog log = run_episode(env, s, *p.policy, substream_seed(g.seed, "simulate"));
      write_episode_log(out / "episode.ndjson", log);
      write_trajectory_csv(out / "trajectories.csv", trajectory_table(log));
      say(g, s.id + ": " + to_string(log.outcome) + " after " + std::to_string(log.steps.size() - 1) +
                 " steps");
    } else if (train_cmd->parsed()) {
      const auto scenarios = read_scenario_set(tr_scenarios);
      if (scenarios.empty()) throw ValidationError("no scenarios found in " + tr_scenarios);
      if (tr_episodes) c.sac.episodes = *tr_episodes;
      if (!tr_variant.empty()) c.sac.variant = parse_sac_variant(tr_variant);
      fs::create_directories(out);
      const std::string header = training_csv_header();
      std::ofstream csv(out / "training.csv");
      csv << header << '\n';
      TrainOptions opts;
      opts.dump_dir = out / "nan-dump";
      opts.on_episode = [&](const TrainingRow& row) {
        csv << training_csv_row(row) << '\n';
        if (!g.quiet && (row.episode + 1) % 10 == 0) {
          std::cout << "episode " << row.episode + 1 << " return " << fixed(row.episode_return) << ' '
                    << to_string(row.outcome) << '\n';
        }
      };
      TrainResult result = train(scenarios, c.sac, c.env, g.seed, opts);
      result.agent.save(out / "checkpoint.txt");
      say(g, "wrote " + (out / "checkpoint.txt").string());
    } else if (eval_cmd->parsed()) {
      auto scenarios = read_scenario_set(ev_scenarios);
      if (scenarios.empty()) throw ValidationError("empty scenario set: " + ev_scenarios);
      if (!ev_model.empty()) {
        for (Scenario& s : scenarios) s.model = parse_pedestrian_model(ev_model);
      }
      if (!ev_variant.empty()) c.sac.variant = parse_sac_variant(ev_variant);
      if (ev_episodes) c.eval.episodes_per_scenario = *ev_episodes;
      const std::string policy_name = ev_policy.empty() ? c.eval.policy : ev_policy;
      PolicyHolder p = make_policy(c, policy_name, ev_checkpoint);
      EnvConfig env_cfg = c.env;
      if (policy_name == "sac") env_cfg.graph_mode = graph_mode_for(c.sac.variant);
      const auto logs = evaluate(scenarios, *p.policy, env_cfg, c.eval.episodes_per_scenario, g.seed);
      for (std::size_t i = 0; i < logs.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "%04zu-", i);
        write_episode_log(out / "logs" / (name + logs[i].scenario_id + ".ndjson"), logs[i]);
      }
      MetricsReport report = av_report(logs);
      report.cr = pedestrian_cr(logs);
      write_text(out / "metrics.json", metrics_to_json(report).dump(2) + "\n");
      write_text(out / "metrics.csv", metrics_csv_header() + "\n" + metrics_csv_row(report) + "\n");
      say(g, "success " + fixed(report.success_rate) + " collision " + fixed(report.collision_rate) +
                 " timeout " + fixed(report.timeout_rate) + " over " + std::to_string(report.episodes) +
                 " episodes");
    } else if (cal->parsed()) {
      std::vector<fs::path> files;
      if (fs::is_directory(cal_truth)) {
        for (const auto& e : fs::directory_iterator(cal_truth)) {
          if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
      } else {
        files.push_back(cal_truth);
      }
      if (files.empty()) throw ValidationError("no trajectory CSV files in " + cal_truth);
      std::vector<TruthEpisode> truth;
      for (const fs::path& f : files) {
        IngestOptions io;
        io.id = f.stem().string();
        truth.push_back(truth_from_table(read_trajectory_csv(f), io));
      }
      CalibrationSpec spec;
      spec.model = cal_model.empty() ? c.calibration.model : parse_pedestrian_model(cal_model);
      spec.boxes = c.calibration.boxes;
      spec.budget = cal_budget.value_or(c.calibration.budget);
      spec.seed = g.seed;
      const CalibrationResult r = calibrate(spec, truth, c.env);
      nlohmann::json params = nlohmann::json::object();
      for (std::size_t i = 0; i < spec.boxes.size(); ++i) params[spec.boxes[i].name] = r.best_values[i];
      write_text(out / "calibration.json",
                 nlohmann::json{{"pedestrian_model", to_string(spec.model)},
                                {"budget", spec.budget},
                                {"best_trial", r.best_trial},
                                {"best_ade", r.best_ade},
                                {"parameters", params}}
                         .dump(2) +
                     "\n");
      write_text(out / "trials.csv", calibration_trials_csv(spec, r));
      say(g, "best ADE " + fixed(r.best_ade) + " at trial " + std::to_string(r.best_trial));
    } else if (ren->parsed()) {
      const EpisodeLog log = read_episode_log(fs::path(ren_log));
      const fs::path target = ren_output.empty() ? out / (fs::path(ren_log).stem().string() + ".svg")
                                                 : fs::path(ren_output);
      write_text(target, render_svg(log, ren_opt));
      say(g, "wrote " + target.string());
    } else if (ing->parsed()) {
      const TrajectoryTable table = read_trajectory_csv(fs::path(ing_csv));
      IngestOptions io;
      io.id = ing_id.empty() ? fs::path(ing_csv).stem().string() : ing_id;
      if (!ing_model.empty()) io.model = parse_pedestrian_model(ing_model);
      const Scenario s = scenario_from_trajectories(table, io);
      write_scenario(out / (io.id + ".json"), s);
      write_trajectory_csv(out / (io.id + ".truth.csv"), table);
      say(g, "ingested " + std::to_string(table.agent_ids.size()) + " agents over " +
                 std::to_string(table.times.size()) + " timestamps");
    } else if (cfg_cmd->parsed()) {
      write_text(out / "config.json", config_to_json(c).dump(2) + "\n");
      say(g, "wrote " + (out / "config.json").string());
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
