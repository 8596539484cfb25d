// Acceptance suite: one PASS/FAIL line per criterion.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "cogrisk/calibration.hpp"
#include "cogrisk/cognition.hpp"
#include "cogrisk/evalkit.hpp"
#include "cogrisk/io.hpp"
#include "cogrisk/neural.hpp"
#include "cogrisk/policy.hpp"
#include "cogrisk/risk.hpp"
#include "cogrisk/sac.hpp"
#include "cogrisk/scenarios.hpp"
#include "oracles.hpp"

using namespace cogrisk;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, ...) {
  char buf[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

// 1. kl_gaussian against quadrature, bayes_update precision identity.
Verdict cognition_oracle() {
  testing::Gen gen(1001);
  double worst_kl = 0.0, worst_precision = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec2 mp = gen.point(3.0), mo = gen.point(3.0);
    const Vec2 vp(gen.uniform(0.05, 4.0), gen.uniform(0.05, 4.0));
    const Vec2 vo(gen.uniform(0.05, 4.0), gen.uniform(0.05, 4.0));
    worst_kl = std::max(worst_kl, std::abs(kl_gaussian({mp, vp}, {mo, vo}) -
                                           testing::kl_quadrature(mp, vp, mo, vo)));
    const GaussianBelief post = bayes_update({mp, vp}, {mo, vo});
    for (int k = 0; k < 2; ++k) {
      const double rhs = 1.0 / vp[k] + 1.0 / vo[k];
      worst_precision = std::max(worst_precision, std::abs(1.0 / post.variance[k] - rhs) / rhs);
    }
  }
  return {worst_kl <= 1e-6 && worst_precision <= 1e-12,
          format("max |kl - quadrature| %.3g (tol 1e-6), max relative precision-sum error %.3g "
                 "(tol 1e-12), 1000 cases",
                 worst_kl, worst_precision)};
}

// 2. Critic and actor gradients against central differences.
Verdict gradient_check() {
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto kind = seed % 2 ? nn::EncoderKind::kGcn : nn::EncoderKind::kFlat;
    const auto r = testing::sac_gradient_check(seed, kind);
    for (const auto* c : {&r.critic1, &r.critic2, &r.actor}) {
      if (c->max_relative_error > worst) {
        worst = c->max_relative_error;
        where = format("seed %d %s", static_cast<int>(seed), c->worst.c_str());
      }
    }
  }
  return {worst < 1e-4,
          format("max relative error %.3g (tol 1e-4) over 20 seeds, worst at %s", worst, where.c_str())};
}

// 3. build_adjacency and gcn_layer against dense elementwise evaluation.
Verdict gcn_oracle() {
  testing::Gen gen(3003);
  RiskParams p;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const WorldState w = gen.world(gen.integer(1, 5));
    const auto n = static_cast<Eigen::Index>(w.agents.size());
    const Matrix u = gen.matrix(n, n).cwiseAbs() * 3.0;
    const InteractionGraph g = build_adjacency(w, u, p);
    const Matrix a = testing::brute_risk_adjacency(w, u, p.lambda_adj, p.gamma1, p.gamma2);
    const Matrix norm = testing::dense_normalized(a);
    worst = std::max(worst, (g.adjacency - a).cwiseAbs().maxCoeff());
    worst = std::max(worst, (g.normalized - norm).cwiseAbs().maxCoeff());
    const bool relu = trial % 2 == 0;
    const auto layer = nn::LayerParams::init(kNodeFeatureDim, 6,
                                             relu ? nn::Activation::kRelu : nn::Activation::kIdentity,
                                             gen.rng);
    const Matrix expected = testing::dense_gcn(norm, g.node_features, layer.weight, layer.bias, relu);
    worst = std::max(worst, (nn::gcn_layer(g.node_features, g.normalized, layer) - expected)
                                .cwiseAbs()
                                .maxCoeff());
  }
  return {worst <= 1e-10, format("max deviation %.3g (tol 1e-10) on 500 graphs of 2-6 nodes", worst)};
}

// 4. Hand-computed values.
Verdict spot_values() {
  std::vector<std::pair<std::string, double>> errors;
  RiskParams p;
  p.gamma1 = 0.5;
  RelativeGeometry g;
  g.d_actual = 4.0;
  g.closing_rate = -1.0;
  g.phi = 0.0;
  errors.emplace_back("virtual_distance",
                      virtual_distance(g, 2.0, 0.0, p) - 4.0 * (1.0 + std::tanh(-1.0)));
  errors.emplace_back("virtual_distance 0.9536",
                      std::abs(virtual_distance(g, 2.0, 0.0, p) - 0.9536) < 5e-5 ? 0.0 : 1.0);
  p.gamma2 = 0.5;
  errors.emplace_back("physical_risk", physical_risk(4.0, p) - 1.0 / 3.0);
  errors.emplace_back("fused_weight", fused_weight(0.5, 1.0, 1.0) - 1.0);
  p.lambda3 = 1.0;
  errors.emplace_back("goal_weight", goal_weight(std::log(2.0), std::vector<double>{}, p) - 0.5);
  errors.emplace_back("critic_target", critic_target(1.0, false, 2.0, -1.0, 0.99, 0.2) - 3.18);
  Matrix target = Matrix::Constant(1, 1, 0.0), online = Matrix::Constant(1, 1, 2.0);
  nn::soft_update({&target}, {&online}, 0.5);
  errors.emplace_back("soft_update", target(0, 0) - 1.0);
  double worst = 0.0;
  std::string name = "none";
  for (const auto& [n, e] : errors) {
    if (std::abs(e) > worst) {
      worst = std::abs(e);
      name = n;
    }
  }
  return {worst <= 1e-9, format("%zu values, max error %.3g (worst: %s, tol 1e-9)", errors.size(), worst,
                                name.c_str())};
}

// 5. Collision counts per pedestrian model on the scripted families.
Verdict safety_ordering() {
  const std::vector<PedestrianModel> models{PedestrianModel::kCrSfm, PedestrianModel::kRaSfm,
                                            PedestrianModel::kSfm};
  std::string detail;
  bool pass = true;
  for (auto t : {ScenarioTemplate::kCollision, ScenarioTemplate::kLatentRisk}) {
    GeneratorConfig g;
    g.scenario_template = t;
    g.max_steps = 40;
    const auto family = generate_scenarios(40, 1, g);
    std::map<PedestrianModel, int> count;
    for (auto m : models) {
      for (Scenario s : family) {
        s.model = m;
        Environment env;
        ZeroPolicy policy;
        const EpisodeLog log = run_episode(env, s, policy, 1);
        count[m] += pedestrian_cr(std::span<const EpisodeLog>(&log, 1), 1) > 0.0;
      }
    }
    const int cr = count[PedestrianModel::kCrSfm], ra = count[PedestrianModel::kRaSfm],
              sfm = count[PedestrianModel::kSfm];
    pass = pass && cr <= ra && ra <= sfm;
    if (t == ScenarioTemplate::kLatentRisk) pass = pass && cr == 0;
    detail += format("%s: cr-sfm %d, ra-sfm %d, sfm %d of 40; ", to_string(t).c_str(), cr, ra, sfm);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

// 6. Held-out ADE after equal-budget calibration against noisy cognitive-risk truth.
Verdict accuracy_ordering() {
  GeneratorConfig g;
  g.min_pedestrians = 2;
  g.max_pedestrians = 3;
  g.max_steps = 40;
  const auto set = generate_scenarios(60, 5, g);
  EnvConfig truth_cfg;
  truth_cfg.pedestrian_noise = 0.1;
  ScriptedPolicy policy;
  std::vector<TruthEpisode> fit, held_out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto t = simulate_truth(set[i], truth_cfg, policy, substream_seed(9, "truth", i));
    (i < 40 ? fit : held_out).push_back(std::move(t));
  }
  const EnvConfig base;
  std::map<PedestrianModel, double> ade;
  ade[PedestrianModel::kCv] = mean_focus_ade(held_out, PedestrianModel::kCv, base);
  for (auto m : {PedestrianModel::kSfm, PedestrianModel::kRaSfm, PedestrianModel::kCrSfm}) {
    CalibrationSpec spec;
    spec.model = m;
    spec.budget = 200;
    spec.seed = 3;
    spec.boxes = {{"v0", 1.0, 1.8}, {"tau", 0.3, 1.0}, {"a_veh", 1.0, 5.0},
                  {"b_veh", 1.0, 3.0}, {"a_ped", 1.0, 3.0}, {"b_ped", 0.4, 1.2}};
    const CalibrationResult r = calibrate(spec, fit, base);
    ade[m] = mean_focus_ade(held_out, m, r.best_config);
  }
  const double cr = ade[PedestrianModel::kCrSfm], sfm = ade[PedestrianModel::kSfm],
               cv = ade[PedestrianModel::kCv];
  return {cr < sfm && sfm < cv,
          format("held-out ADE cr-sfm %.4f, ra-sfm %.4f, sfm %.4f, cv %.4f (20 scenarios, budget 200)",
                 cr, ade[PedestrianModel::kRaSfm], sfm, cv)};
}

double success_rate(const std::vector<Scenario>& scenarios, const SacAgent& agent, EnvConfig env,
                    SacVariant variant, int per_scenario, std::uint64_t seed) {
  env.graph_mode = graph_mode_for(variant);
  SacPolicy policy(agent, true);
  return av_report(evaluate(scenarios, policy, env, per_scenario, seed)).success_rate;
}

// 7. SAC learning on the single crossing and the 3-pedestrian suite.
Verdict policy_learning() {
  EnvConfig env;
  env.jitter_position = 0.5;
  env.jitter_speed = 0.1;

  const std::vector<Scenario> single{single_crossing_scenario()};
  SacConfig config;
  config.episodes = 200;
  const double untrained = success_rate(single, SacAgent(config, 1), env, config.variant, 50, 99);
  const double trained =
      success_rate(single, train(single, config, env, 5).agent, env, config.variant, 50, 99);

  GeneratorConfig g;
  g.min_pedestrians = 3;
  g.max_pedestrians = 3;
  const auto suite = generate_scenarios(40, 21, g);
  const std::vector<Scenario> fit(suite.begin(), suite.begin() + 30), test(suite.begin() + 30, suite.end());
  std::map<SacVariant, double> rate;
  for (auto v : {SacVariant::kGcnRisk, SacVariant::kGcnUniform, SacVariant::kFlat}) {
    SacConfig c;
    c.variant = v;
    c.episodes = 150;
    rate[v] = success_rate(test, train(fit, c, env, 1).agent, env, v, 5, 99);
  }
  const double cog = rate[SacVariant::kGcnRisk], nocog = rate[SacVariant::kGcnUniform],
               flat = rate[SacVariant::kFlat];
  // Two binomial standard errors of the difference over 50 episodes each.
  const double noise = 2.0 * std::sqrt((nocog * (1 - nocog) + flat * (1 - flat)) / 50.0);
  return {trained >= 0.9 && untrained <= 0.3 && cog >= nocog,
          format("single crossing: trained %.2f (>= 0.9), untrained %.2f (<= 0.3); suite: "
                 "gcn-risk %.2f >= gcn-uniform %.2f; flat %.2f (gcn-uniform %s flat within noise %.2f)",
                 trained, untrained, cog, nocog, flat, nocog >= flat - noise ? ">=" : "<", noise)};
}

// 8. Metric kit against naive recomputation.
Verdict metric_oracle() {
  testing::Gen gen(8008);
  double worst = 0.0;
  bool rates_equal = true;
  std::vector<EpisodeLog> pool;
  for (int trial = 0; trial < 100; ++trial) {
    const int agents = gen.integer(1, 4), steps = gen.integer(1, 30);
    EpisodeLog sim = gen.episode_log(agents, steps), truth = gen.episode_log(agents, gen.integer(1, 30));
    const int id = gen.integer(0, agents - 1);
    const Trajectory ts = agent_trajectory(sim, id), tt = agent_trajectory(truth, id);
    worst = std::max(worst, std::abs(ade(ts, tt) - testing::naive_ade(sim, truth, id)));
    worst = std::max(worst, std::abs(fde(ts, tt) - testing::naive_fde(sim, truth, id)));
    pool.push_back(std::move(sim));
    const std::vector<EpisodeLog> logs(pool.end() - std::min<std::ptrdiff_t>(pool.size(), gen.integer(1, 8)),
                                       pool.end());
    const MetricsReport a = av_report(logs), b = testing::naive_av_report(logs);
    for (auto [x, y] : {std::pair{a.avg_jerk, b.avg_jerk}, std::pair{a.avg_speed, b.avg_speed},
                        std::pair{a.avg_max_abs_accel, b.avg_max_abs_accel}})
      worst = std::max(worst, std::abs(x - y));
    rates_equal = rates_equal && a.success_rate == b.success_rate &&
                  a.collision_rate == b.collision_rate && a.timeout_rate == b.timeout_rate &&
                  a.episodes == b.episodes;
  }
  return {worst <= 1e-12 && rates_equal,
          format("max deviation %.3g (tol 1e-12) on 100 random logs, outcome rates %s", worst,
                 rates_equal ? "identical" : "differ")};
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).generic_string()] =
        std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

// 9. simulate, train and eval twice with fixed seeds; trees must match byte for byte.
Verdict cli_determinism(const std::string& exe) {
  const fs::path work = fs::temp_directory_path() / "cogrisk-acceptance-determinism";
  fs::remove_all(work);
  fs::create_directories(work);
  {
    std::ofstream cfg(work / "config.json");
    cfg << R"({"environment": {"pedestrian_noise": 0.1, "jitter_position": 0.3, "jitter_speed": 0.1},
 "sac": {"warmup": 40, "batch_size": 16, "eval_interval": 2, "eval_episodes": 2,
         "network": {"gcn_hidden": 16, "mlp_hidden": 32}}})";
  }
  std::vector<std::string> failures;
  for (const char* run : {"a", "b"}) {
    const fs::path out = work / run;
    const std::string base = "\"" + exe + "\" --quiet --seed 17 --config \"" +
                             (work / "config.json").string() + "\" --out-dir \"";
    const std::vector<std::string> commands{
        base + (out / "generate").string() + "\" generate --count 3",
        base + (out / "simulate").string() + "\" simulate --scenario \"" +
            (out / "generate" / "scenarios" / "crossing-0000.json").string() + "\"",
        base + (out / "train").string() + "\" train --scenarios \"" +
            (out / "generate" / "scenarios").string() + "\" --episodes 6",
        base + (out / "eval").string() + "\" eval --scenarios \"" +
            (out / "generate" / "scenarios").string() + "\" --policy sac --checkpoint \"" +
            (out / "train" / "checkpoint.txt").string() + "\" --episodes-per-scenario 2",
    };
    for (const auto& cmd : commands)
      if (std::system(cmd.c_str()) != 0) failures.push_back(cmd);
  }
  if (!failures.empty()) return {false, "command failed: " + failures.front()};
  const auto a = read_tree(work / "a"), b = read_tree(work / "b");
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) differing.push_back(name);
  }
  for (const auto& [name, bytes] : b)
    if (!a.count(name)) differing.push_back(name);
  fs::remove_all(work);
  if (!differing.empty())
    return {false, format("%zu files differ, first %s", differing.size(), differing.front().c_str())};
  return {a.size() >= 6, format("%zu files byte-identical across two runs of generate, simulate, "
                                "train and eval",
                                a.size())};
}

struct Criterion {
  int number;
  std::string name;
  double time_limit;  // seconds, 0 = none
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<int> selected;
  std::string exe = COGRISK_CLI_PATH;
  app.add_option("--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--cogrisk", exe, "Path of the cogrisk executable");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "cognition oracle", 10, cognition_oracle},
      {2, "gradient correctness", 60, gradient_check},
      {3, "gcn/adjacency oracle", 0, gcn_oracle},
      {4, "closed-form spot values", 0, spot_values},
      {5, "cr-sfm safety ordering", 120, safety_ordering},
      {6, "pedestrian-model accuracy ordering", 600, accuracy_ordering},
      {7, "policy learning", 1800, policy_learning},
      {8, "metric kit oracle", 0, metric_oracle},
      {9, "cli determinism", 0, [&] { return cli_determinism(exe); }},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.number) == selected.end())
      continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v = c.run();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = format("%.1f s", seconds);
    if (c.time_limit > 0) {
      timing += format(", limit %.0f s", c.time_limit);
      v.pass = v.pass && seconds < c.time_limit;
    }
    std::printf("%s %d %s: %s [%s]\n", v.pass ? "PASS" : "FAIL", c.number, c.name.c_str(),
                v.detail.c_str(), timing.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
