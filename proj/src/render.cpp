#include "cogrisk/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cogrisk/error.hpp"

namespace cogrisk {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", std::abs(v) < 5e-4 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* colour(const AgentMeta& m) {
  if (m.kind == AgentKind::kAv) return "#d62728";
  return m.ghost ? "#7f7f7f" : "#1f77b4";
}

struct Frame {
  double min_x, max_y, scale, margin_px;
  double x(double wx) const { return margin_px + (wx - min_x) * scale; }
  double y(double wy) const { return margin_px + (max_y - wy) * scale; }
};

void time_series_panel(std::ostringstream& os, const EpisodeLog& log, double top, double width,
                       const char* label, double (*value)(const AgentRecord&)) {
  const double height = 120.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const StepRecord& s : log.steps) {
    lo = std::min(lo, value(s.agents.front()));
    hi = std::max(hi, value(s.agents.front()));
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double t_end = std::max(log.steps.back().time, 1e-9);
  os << "<g class=\"panel\">\n";
  os << "<rect x=\"40\" y=\"" << num(top) << "\" width=\"" << num(width - 60) << "\" height=\""
     << num(height) << "\" fill=\"none\" stroke=\"#999\"/>\n";
  os << "<text x=\"44\" y=\"" << num(top + 14) << "\" font-size=\"12\">" << label << " ["
     << num(lo) << ", " << num(hi) << "]</text>\n";
  os << "<polyline fill=\"none\" stroke=\"#d62728\" points=\"";
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const double px = 40.0 + (width - 60.0) * log.steps[k].time / t_end;
    const double py = top + height - height * (value(log.steps[k].agents.front()) - lo) / (hi - lo);
    os << (k ? " " : "") << num(px) << ',' << num(py);
  }
  os << "\"/>\n</g>\n";
}

}  // namespace

std::string render_svg(const EpisodeLog& log, const RenderOptions& opt) {
  if (opt.width < 100) throw ValidationError("render width must be >= 100 px");
  if (!(opt.margin >= 0.0)) throw ValidationError("render margin must be >= 0");
  if (log.steps.empty()) throw ValidationError("cannot render an episode without steps");

  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  auto extend = [&](const Vec2& p) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  };
  for (const StepRecord& s : log.steps) {
    for (const AgentRecord& a : s.agents) extend(a.position);
  }
  for (const AgentMeta& m : log.agents) extend(m.goal);
  min_x -= opt.margin;
  max_x += opt.margin;
  min_y -= opt.margin;
  max_y += opt.margin;
  const double span_x = std::max(max_x - min_x, 1.0);
  const double span_y = std::max(max_y - min_y, 1.0);
  const double margin_px = 20.0;
  const double scale = (opt.width - 2.0 * margin_px) / span_x;
  const double scene_h = span_y * scale + 2.0 * margin_px;
  const double panels_h = opt.time_series ? 3 * 140.0 : 0.0;
  const Frame f{min_x, max_y, scale, margin_px};

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
     << num(scene_h + panels_h) << "\" viewBox=\"0 0 " << opt.width << ' '
     << num(scene_h + panels_h) << "\">\n";
  os << "<title>" << escape(log.scenario_id) << " (" << escape(log.pedestrian_model) << ", "
     << to_string(log.outcome) << ")</title>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t i = 0; i < log.agents.size(); ++i) {
    const AgentMeta& m = log.agents[i];
    if (m.ghost && !opt.show_ghosts) continue;
    const char* c = colour(m);
    os << "<g class=\"agent\" id=\"agent-" << m.id << "\">\n";
    os << "<polyline class=\"trajectory\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\""
       << (m.ghost ? " stroke-dasharray=\"4 3\"" : "") << " points=\"";
    for (std::size_t k = 0; k < log.steps.size(); ++k) {
      const Vec2& p = log.steps[k].agents[i].position;
      os << (k ? " " : "") << num(f.x(p.x())) << ',' << num(f.y(p.y()));
    }
    os << "\"/>\n";
    for (const StepRecord& s : log.steps) {
      const Vec2& p = s.agents[i].position;
      os << "<circle class=\"step\" cx=\"" << num(f.x(p.x())) << "\" cy=\"" << num(f.y(p.y()))
         << "\" r=\"1.5\" fill=\"" << c << "\"/>\n";
    }
    const Vec2& start = log.steps.front().agents[i].position;
    os << "<circle class=\"start\" cx=\"" << num(f.x(start.x())) << "\" cy=\"" << num(f.y(start.y()))
       << "\" r=\"" << num(std::max(3.0, m.radius * scale)) << "\" fill=\"none\" stroke=\"" << c
       << "\"/>\n";
    os << "<rect class=\"goal\" x=\"" << num(f.x(m.goal.x()) - 4) << "\" y=\"" << num(f.y(m.goal.y()) - 4)
       << "\" width=\"8\" height=\"8\" fill=\"none\" stroke=\"" << c << "\"/>\n";
    os << "</g>\n";
  }

  std::set<std::pair<int, int>> marked;
  for (const StepRecord& s : log.steps) {
    for (auto [a, b] : s.collisions) {
      if (a > b) std::swap(a, b);
      if (!marked.insert({a, b}).second) continue;
      const Vec2 mid = 0.5 * (s.agents[a].position + s.agents[b].position);
      const double cx = f.x(mid.x()), cy = f.y(mid.y()), h = 6.0;
      os << "<path class=\"collision\" d=\"M" << num(cx - h) << ',' << num(cy - h) << " L"
         << num(cx + h) << ',' << num(cy + h) << " M" << num(cx - h) << ',' << num(cy + h) << " L"
         << num(cx + h) << ',' << num(cy - h) << "\" stroke=\"red\" stroke-width=\"2.5\"/>\n";
    }
  }

  if (opt.time_series) {
    time_series_panel(os, log, scene_h + 10.0, opt.width, "AV speed (m/s)",
                      [](const AgentRecord& a) { return a.speed; });
    time_series_panel(os, log, scene_h + 150.0, opt.width, "AV accel (m/s^2)",
                      [](const AgentRecord& a) { return a.accel; });
    time_series_panel(os, log, scene_h + 290.0, opt.width, "AV heading (rad)",
                      [](const AgentRecord& a) { return a.heading; });
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace cogrisk
