#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lo3d/sandbox.hpp"

namespace lo3d {

// Scene spec text format, one `key = value` pair per line, '#' starts a
// comment, scenes in one file are separated by a line holding `---`.
//
//   task = reach_around
//   seed = 42
//   start = <x> <y>
//   ee_radius = <r>
//   workspace = <lo_x> <lo_y> <hi_x> <hi_y>
//   q_star = <world units>
//   cloud_points = <count>
//   targets = <label>[,<label>...]
//   obstacles = <label>[,<label>...]      (may be empty)
//   object = <label> disc <r> at <x> <y> [yaw <rad>]
//   object = <label> rectangle <w> <h> at <x> <y> [yaw <rad>]
//   object = <label> polygon <n> <x1> <y1> ... <xn> <yn> at <x> <y> [yaw <rad>]
//
// Numbers are written with 17 significant digits so a round trip is exact.
std::string format_scene(const Scene& scene);
Scene parse_scene(const std::string& text);

std::string format_scenes(const std::vector<Scene>& scenes);
std::vector<Scene> parse_scenes(const std::string& text);

void write_scenes(const std::vector<Scene>& scenes, const std::filesystem::path& path);
std::vector<Scene> read_scenes(const std::filesystem::path& path);

}  // namespace lo3d
