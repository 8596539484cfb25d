#include "cogrisk/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cogrisk/error.hpp"
#include "json_fields.hpp"

namespace cogrisk {

using nlohmann::json;
using detail::JsonObject;

namespace {

json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 read_vec(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ValidationError(where + ": expected [x, y]");
  return Vec2(JsonObject::convert<double>(j[0], where), JsonObject::convert<double>(j[1], where));
}

std::string kind_name(AgentKind k) { return k == AgentKind::kAv ? "av" : "pedestrian"; }

AgentKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "av") return AgentKind::kAv;
  if (s == "pedestrian") return AgentKind::kPedestrian;
  throw ValidationError(where + ": kind must be 'av' or 'pedestrian'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

json scenario_to_json(const Scenario& s) {
  json agents = json::array();
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const AgentState& a = s.agents[i];
    json ja = {{"id", a.id},
               {"kind", kind_name(a.kind)},
               {"x", a.position.x()},
               {"y", a.position.y()},
               {"heading", a.heading},
               {"speed", a.speed},
               {"radius", a.radius},
               {"goal", vec(a.goal)}};
    if (s.is_ghost(a.id)) {
      json track = json::array();
      for (const ReplaySample& r : s.replay[i]) {
        track.push_back({r.position.x(), r.position.y(), r.velocity.x(), r.velocity.y()});
      }
      ja["replay"] = std::move(track);
    }
    agents.push_back(std::move(ja));
  }
  return {{"schema_version", kScenarioSchemaVersion},
          {"id", s.id},
          {"dt", s.dt},
          {"pedestrian_model", to_string(s.model)},
          {"max_steps", s.max_steps},
          {"seed", s.seed},
          {"agents", std::move(agents)}};
}

Scenario scenario_from_json(const json& j, const std::string& source) {
  JsonObject o(j, source);
  const int version = o.require<int>("schema_version");
  if (version != kScenarioSchemaVersion) {
    throw ValidationError(source + ": unsupported schema_version " + std::to_string(version));
  }
  Scenario s;
  s.id = o.require<std::string>("id");
  s.dt = o.require<double>("dt");
  s.model = parse_pedestrian_model(o.require<std::string>("pedestrian_model"));
  s.max_steps = o.require<int>("max_steps");
  s.seed = o.require<std::uint64_t>("seed");
  const json& agents = o.at("agents");
  if (!agents.is_array()) throw ValidationError(source + ".agents: expected an array");
  bool any_replay = false;
  std::vector<std::vector<ReplaySample>> replay;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string where = source + ".agents[" + std::to_string(i) + "]";
    JsonObject a(agents[i], where);
    const int id = a.require<int>("id");
    const AgentKind kind = parse_kind(a.require<std::string>("kind"), where);
    const Vec2 pos(a.require<double>("x"), a.require<double>("y"));
    const double heading = a.require<double>("heading");
    const double speed = a.require<double>("speed");
    const double radius = a.require<double>("radius");
    const Vec2 goal = read_vec(a.at("goal"), where + ".goal");
    std::vector<ReplaySample> track;
    if (a.has("replay")) {
      const json& r = a.at("replay");
      if (!r.is_array() || r.empty()) throw ValidationError(where + ".replay: expected a non-empty array");
      for (std::size_t k = 0; k < r.size(); ++k) {
        const std::string rw = where + ".replay[" + std::to_string(k) + "]";
        if (!r[k].is_array() || r[k].size() != 4) throw ValidationError(rw + ": expected [x, y, vx, vy]");
        track.push_back({Vec2(JsonObject::convert<double>(r[k][0], rw), JsonObject::convert<double>(r[k][1], rw)),
                         Vec2(JsonObject::convert<double>(r[k][2], rw), JsonObject::convert<double>(r[k][3], rw))});
      }
      any_replay = true;
    }
    a.finish();
    s.agents.push_back(make_agent(id, kind, pos, heading, speed, goal, radius));
    replay.push_back(std::move(track));
  }
  o.finish();
  if (any_replay) s.replay = std::move(replay);
  try {
    validate(s);
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return s;
}

void write_scenario(const std::filesystem::path& path, const Scenario& scenario) {
  write_text(path, scenario_to_json(scenario).dump(2) + "\n");
}

Scenario read_scenario(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  return scenario_from_json(j, path.string());
}

std::vector<Scenario> read_scenario_set(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw ValidationError("scenario path " + path.string() + " does not exist");
  if (!fs::is_directory(path)) return {read_scenario(path)};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (const auto& f : files) out.push_back(read_scenario(f));
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory CSV

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& field, const std::string& where) {
  T value{};
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw ValidationError(where + ": cannot parse '" + field + "' as a number");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ValidationError(where + ": non-finite value");
  }
  return value;
}

std::string format_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

}  // namespace

TrajectoryTable read_trajectory_csv(std::istream& is, const std::string& source) {
  std::string line;
  int line_no = 0;
  auto where = [&] { return source + ":" + std::to_string(line_no); };
  if (!std::getline(is, line)) throw ValidationError(source + ": empty file");
  ++line_no;
  const std::vector<std::string> header = split_fields(line);
  const std::vector<std::string> expected = {"t", "agent_id", "x", "y", "vx", "vy"};
  if (header != expected) throw ValidationError(where() + ": header must be t,agent_id,x,y,vx,vy");

  struct Row {
    double t;
    int id;
    ReplaySample sample;
    int line;
  };
  std::vector<Row> rows;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != 6) {
      throw ValidationError(where() + ": expected 6 fields, found " + std::to_string(f.size()));
    }
    Row r{parse_number<double>(f[0], where()), parse_number<int>(f[1], where()),
          {Vec2(parse_number<double>(f[2], where()), parse_number<double>(f[3], where())),
           Vec2(parse_number<double>(f[4], where()), parse_number<double>(f[5], where()))},
          line_no};
    if (!rows.empty()) {
      const Row& p = rows.back();
      if (r.t < p.t || (r.t == p.t && r.id <= p.id)) {
        throw ValidationError(where() + ": rows must be sorted by (t, agent_id) without duplicates");
      }
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw ValidationError(source + ": no data rows");

  TrajectoryTable table;
  for (const Row& r : rows) {
    if (table.times.empty() || table.times.back() != r.t) table.times.push_back(r.t);
  }
  if (table.times.size() < 2) throw ValidationError(source + ": need at least two timestamps");
  table.dt = table.times[1] - table.times[0];
  for (std::size_t k = 1; k < table.times.size(); ++k) {
    const double step = table.times[k] - table.times[k - 1];
    if (std::abs(step - table.dt) > 1e-6 * std::max(1.0, table.dt)) {
      throw ValidationError(source + ": non-uniform time step at t=" + format_time(table.times[k]) +
                            " (" + format_time(step) + " vs " + format_time(table.dt) + ")");
    }
  }
  for (const Row& r : rows) table.agent_ids.push_back(r.id);
  std::sort(table.agent_ids.begin(), table.agent_ids.end());
  table.agent_ids.erase(std::unique(table.agent_ids.begin(), table.agent_ids.end()),
                        table.agent_ids.end());

  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < table.agent_ids.size(); ++i) index[table.agent_ids[i]] = i;
  table.tracks.assign(table.agent_ids.size(), {});
  std::size_t r = 0;
  for (double t : table.times) {
    std::size_t found = 0;
    std::vector<bool> present(table.agent_ids.size(), false);
    for (; r < rows.size() && rows[r].t == t; ++r, ++found) {
      const std::size_t i = index[rows[r].id];
      present[i] = true;
      table.tracks[i].push_back(rows[r].sample);
    }
    if (found != table.agent_ids.size()) {
      for (std::size_t i = 0; i < present.size(); ++i) {
        if (!present[i]) {
          throw ValidationError(source + ": agent " + std::to_string(table.agent_ids[i]) +
                                " missing at t=" + format_time(t));
        }
      }
    }
  }
  return table;
}

TrajectoryTable read_trajectory_csv(const std::filesystem::path& path) {
  std::istringstream is(read_text(path));
  return read_trajectory_csv(is, path.string());
}

void write_trajectory_csv(std::ostream& os, const TrajectoryTable& table) {
  os << "t,agent_id,x,y,vx,vy\n";
  for (std::size_t k = 0; k < table.times.size(); ++k) {
    for (std::size_t i = 0; i < table.agent_ids.size(); ++i) {
      const ReplaySample& s = table.tracks[i][k];
      os << format_double(table.times[k]) << ',' << table.agent_ids[i] << ','
         << format_double(s.position.x()) << ',' << format_double(s.position.y()) << ','
         << format_double(s.velocity.x()) << ',' << format_double(s.velocity.y()) << '\n';
    }
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryTable& table) {
  std::ostringstream os;
  write_trajectory_csv(os, table);
  write_text(path, os.str());
}

TrajectoryTable trajectory_table(const EpisodeLog& log) {
  TrajectoryTable t;
  t.dt = log.dt;
  for (const AgentMeta& m : log.agents) t.agent_ids.push_back(m.id);
  t.tracks.assign(log.agents.size(), {});
  for (const StepRecord& s : log.steps) {
    t.times.push_back(s.time);
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
      t.tracks[i].push_back({s.agents[i].position, s.agents[i].velocity});
    }
  }
  return t;
}

Scenario scenario_from_trajectories(const TrajectoryTable& table, const IngestOptions& options) {
  if (table.agent_ids.empty()) throw ValidationError("trajectory table has no agents");
  Scenario s;
  s.id = options.id;
  s.dt = table.dt;
  s.model = options.model;
  s.max_steps = options.max_steps > 0 ? options.max_steps
                                      : std::max(1, static_cast<int>(table.times.size()) - 1);
  for (std::size_t i = 0; i < table.agent_ids.size(); ++i) {
    const auto& track = table.tracks[i];
    const AgentKind kind = i == 0 ? AgentKind::kAv : AgentKind::kPedestrian;
    const Vec2 start = track.front().position;
    const Vec2 goal = track.back().position;
    const Vec2 v = track.front().velocity;
    double heading = 0.0;
    if (v.norm() > 0.0) {
      heading = std::atan2(v.y(), v.x());
    } else if ((goal - start).norm() > 0.0) {
      heading = std::atan2(goal.y() - start.y(), goal.x() - start.x());
    }
    AgentState a = make_agent(static_cast<int>(i), kind, start, heading, v.norm(), goal);
    a.velocity = v;
    s.agents.push_back(a);
  }
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------
// NDJSON episode logs

void write_episode_log(std::ostream& os, const EpisodeLog& log) {
  json agents = json::array();
  for (const AgentMeta& m : log.agents) {
    agents.push_back({{"id", m.id},
                      {"kind", kind_name(m.kind)},
                      {"radius", m.radius},
                      {"goal", vec(m.goal)},
                      {"ghost", m.ghost}});
  }
  os << json{{"type", "episode"},
             {"scenario_id", log.scenario_id},
             {"seed", log.seed},
             {"dt", log.dt},
             {"pedestrian_model", log.pedestrian_model},
             {"agents", std::move(agents)}}
            .dump()
     << '\n';
  for (const StepRecord& s : log.steps) {
    json ja = json::array();
    for (const AgentRecord& a : s.agents) {
      ja.push_back({{"id", a.id},
                    {"position", vec(a.position)},
                    {"velocity", vec(a.velocity)},
                    {"heading", a.heading},
                    {"speed", a.speed},
                    {"accel", a.accel}});
    }
    json ju = json::array();
    for (const auto& [i, j, u] : s.uncertainties) ju.push_back({i, j, u});
    json jc = json::array();
    for (const auto& [i, j] : s.collisions) jc.push_back({i, j});
    os << json{{"type", "step"},
               {"step", s.step},
               {"time", s.time},
               {"action", {s.action.accel, s.action.dheading}},
               {"reward", s.reward},
               {"agents", std::move(ja)},
               {"uncertainties", std::move(ju)},
               {"collisions", std::move(jc)}}
              .dump()
       << '\n';
  }
  os << json{{"type", "outcome"}, {"outcome", to_string(log.outcome)}}.dump() << '\n';
}

void write_episode_log(const std::filesystem::path& path, const EpisodeLog& log) {
  std::ostringstream os;
  write_episode_log(os, log);
  write_text(path, os.str());
}

EpisodeLog read_episode_log(std::istream& is, const std::string& source) {
  EpisodeLog log;
  std::string line;
  int line_no = 0;
  bool have_header = false, have_outcome = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (have_outcome) throw ValidationError(where + ": record after the outcome record");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + ": invalid JSON: " + e.what());
    }
    JsonObject o(j, where);
    const std::string type = o.require<std::string>("type");
    if (type == "episode") {
      if (have_header) throw ValidationError(where + ": duplicate episode header");
      have_header = true;
      log.scenario_id = o.require<std::string>("scenario_id");
      log.seed = o.require<std::uint64_t>("seed");
      log.dt = o.require<double>("dt");
      log.pedestrian_model = o.require<std::string>("pedestrian_model");
      const json& agents = o.at("agents");
      if (!agents.is_array()) throw ValidationError(where + ".agents: expected an array");
      for (const json& ja : agents) {
        JsonObject a(ja, where + ".agents");
        AgentMeta m;
        m.id = a.require<int>("id");
        m.kind = parse_kind(a.require<std::string>("kind"), where);
        m.radius = a.require<double>("radius");
        m.goal = read_vec(a.at("goal"), where + ".goal");
        m.ghost = a.require<bool>("ghost");
        a.finish();
        log.agents.push_back(m);
      }
    } else if (type == "step") {
      if (!have_header) throw ValidationError(where + ": step record before the episode header");
      StepRecord s;
      s.step = o.require<int>("step");
      s.time = o.require<double>("time");
      const json& act = o.at("action");
      if (!act.is_array() || act.size() != 2) throw ValidationError(where + ".action: expected [accel, dheading]");
      s.action.accel = JsonObject::convert<double>(act[0], where + ".action");
      s.action.dheading = JsonObject::convert<double>(act[1], where + ".action");
      s.reward = o.require<double>("reward");
      for (const json& ja : o.at("agents")) {
        JsonObject a(ja, where + ".agents");
        AgentRecord r;
        r.id = a.require<int>("id");
        r.position = read_vec(a.at("position"), where + ".position");
        r.velocity = read_vec(a.at("velocity"), where + ".velocity");
        r.heading = a.require<double>("heading");
        r.speed = a.require<double>("speed");
        r.accel = a.require<double>("accel");
        a.finish();
        s.agents.push_back(r);
      }
      for (const json& ju : o.at("uncertainties")) {
        if (!ju.is_array() || ju.size() != 3) throw ValidationError(where + ".uncertainties: expected [i, j, u]");
        s.uncertainties.emplace_back(JsonObject::convert<int>(ju[0], where), JsonObject::convert<int>(ju[1], where),
                                     JsonObject::convert<double>(ju[2], where));
      }
      for (const json& jc : o.at("collisions")) {
        if (!jc.is_array() || jc.size() != 2) throw ValidationError(where + ".collisions: expected [i, j]");
        s.collisions.emplace_back(JsonObject::convert<int>(jc[0], where), JsonObject::convert<int>(jc[1], where));
      }
      if (s.agents.size() != log.agents.size()) {
        throw ValidationError(where + ": agent count differs from the header");
      }
      log.steps.push_back(std::move(s));
    } else if (type == "outcome") {
      if (!have_header) throw ValidationError(where + ": outcome record before the episode header");
      log.outcome = parse_outcome(o.require<std::string>("outcome"));
      have_outcome = true;
    } else {
      throw ValidationError(where + ": unknown record type '" + type + "'");
    }
    o.finish();
  }
  if (!have_header) throw ValidationError(source + ": missing episode header");
  if (!have_outcome) throw ValidationError(source + ": missing outcome record");
  return log;
}

EpisodeLog read_episode_log(const std::filesystem::path& path) {
  std::istringstream is(read_text(path));
  return read_episode_log(is, path.string());
}

// ---------------------------------------------------------------------------
// Metrics

json metrics_to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"episodes", r.episodes},
          {"ade", opt(r.ade)},
          {"fde", opt(r.fde)},
          {"cr", opt(r.cr)},
          {"success_rate", r.success_rate},
          {"collision_rate", r.collision_rate},
          {"timeout_rate", r.timeout_rate},
          {"avg_speed", r.avg_speed},
          {"avg_jerk", r.avg_jerk},
          {"avg_max_abs_accel", r.avg_max_abs_accel}};
}

MetricsReport metrics_from_json(const json& j) {
  JsonObject o(j, "metrics");
  MetricsReport r;
  r.episodes = o.require<int>("episodes");
  for (auto [key, field] : {std::pair{"ade", &r.ade}, std::pair{"fde", &r.fde}, std::pair{"cr", &r.cr}}) {
    const json& v = o.at(key);
    if (!v.is_null()) *field = JsonObject::convert<double>(v, o.path(key));
  }
  r.success_rate = o.require<double>("success_rate");
  r.collision_rate = o.require<double>("collision_rate");
  r.timeout_rate = o.require<double>("timeout_rate");
  r.avg_speed = o.require<double>("avg_speed");
  r.avg_jerk = o.require<double>("avg_jerk");
  r.avg_max_abs_accel = o.require<double>("avg_max_abs_accel");
  o.finish();
  return r;
}

std::string metrics_csv_header() {
  return "episodes,ade,fde,cr,success_rate,collision_rate,timeout_rate,avg_speed,avg_jerk,"
         "avg_max_abs_accel";
}

std::string metrics_csv_row(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream os;
  os << r.episodes << ',' << opt(r.ade) << ',' << opt(r.fde) << ',' << opt(r.cr) << ','
     << format_double(r.success_rate) << ',' << format_double(r.collision_rate) << ','
     << format_double(r.timeout_rate) << ',' << format_double(r.avg_speed) << ','
     << format_double(r.avg_jerk) << ',' << format_double(r.avg_max_abs_accel);
  return os.str();
}

}  // namespace cogrisk
