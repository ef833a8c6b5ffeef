#pragma once

#include <string>

#include "lo3d/sandbox.hpp"

namespace lo3d {

struct SvgStyle {
  double size_px = 480.0;
  int precision = 5;
};

/// Workspace frame, one outline per scene object, a Q* circle around every
/// obstacle, the executed path as a polyline and one group of waypoint dots per
/// issued plan. Elements carry classes frame/object/qstar/path/plan/waypoint.
std::string render_episode_svg(const Scene& scene, const EpisodeTrace& trace, const EpisodeResult* result = nullptr,
                               const SvgStyle& style = {});

}  // namespace lo3d
