#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogrisk/env.hpp"
#include "cogrisk/evalkit.hpp"

namespace cogrisk {

inline constexpr int kScenarioSchemaVersion = 1;

nlohmann::json scenario_to_json(const Scenario& scenario);
// Validates the document; unknown fields are rejected.
Scenario scenario_from_json(const nlohmann::json& j, const std::string& source = "scenario");

void write_scenario(const std::filesystem::path& path, const Scenario& scenario);
Scenario read_scenario(const std::filesystem::path& path);
// A single scenario file, or every *.json file of a directory in name order.
std::vector<Scenario> read_scenario_set(const std::filesystem::path& path);

// Rows of "t,agent_id,x,y,vx,vy", one track per agent.
struct TrajectoryTable {
  double dt = kDefaultDt;
  std::vector<double> times;
  std::vector<int> agent_ids;                     // ascending
  std::vector<std::vector<ReplaySample>> tracks;  // [agent][time index]
};

TrajectoryTable read_trajectory_csv(std::istream& is, const std::string& source = "csv");
TrajectoryTable read_trajectory_csv(const std::filesystem::path& path);
void write_trajectory_csv(std::ostream& os, const TrajectoryTable& table);
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryTable& table);

TrajectoryTable trajectory_table(const EpisodeLog& log);

struct IngestOptions {
  std::string id = "ingested";
  PedestrianModel model = PedestrianModel::kCrSfm;
  int max_steps = 0;  // 0: length of the recording
};

// Initial rows become the initial states, final positions become goals. The
// lowest agent id is the AV, all others are pedestrians; ids are renumbered
// 0..n-1 in ascending order.
Scenario scenario_from_trajectories(const TrajectoryTable& table, const IngestOptions& options = {});

// Newline-delimited JSON: one "episode" header record, one "step" record per
// step, one closing "outcome" record.
void write_episode_log(std::ostream& os, const EpisodeLog& log);
void write_episode_log(const std::filesystem::path& path, const EpisodeLog& log);
EpisodeLog read_episode_log(std::istream& is, const std::string& source = "log");
EpisodeLog read_episode_log(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);

// Exact text of a file; throws ValidationError when it cannot be opened.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cogrisk
