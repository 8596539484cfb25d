#pragma once

#include <string>

#include "cogrisk/evalkit.hpp"

namespace cogrisk {

struct RenderOptions {
  int width = 800;               // px of the trajectory panel
  double margin = 2.0;           // m of padding around the scene
  bool time_series = false;      // AV speed/accel/heading panels under the scene
  bool show_ghosts = true;
};

// Trajectory polylines with per-step markers, start circles, goal squares and
// one cross per colliding pair (at the pair's first contact).
std::string render_svg(const EpisodeLog& log, const RenderOptions& options = {});

}  // namespace cogrisk
