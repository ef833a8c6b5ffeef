#pragma once

#include <string>
#include <vector>

#include "lo3d/sandbox.hpp"

namespace lo3d {

// Per-episode columns, in order:
//   scene_index, scene_seed, rollout_seed, success, collided, diverged,
//   min_clearance, path_length, smoothness, plans_issued, final_distance,
//   guidance_evaluations, fallbacks
// with wall_ms_per_plan appended when `timing` is set. Wall-clock time is the
// only nondeterministic quantity, so it is opt-in.
std::string eval_csv_header(bool timing = false);
std::string eval_csv_row(const EvalRow& row, bool timing = false);
std::string eval_csv(const EvalTable& table, bool timing = false);

/// One line of `key=value` pairs: episodes, success_rate, collision_rate,
/// mean_min_clearance, mean_smoothness, mean_path_length, mean_plans.
std::string summary_line(const EvalSummary& s, bool timing = false);

struct SweepPoint {
  double rho = 0.0;      // multiple of the base scale
  double rho_abs = 0.0;  // value handed to the sampler
  EvalSummary summary;
};

// Columns: rho, rho_abs, episodes, success_rate, collision_rate,
// mean_min_clearance, mean_smoothness, mean_path_length
std::string sweep_csv(const std::vector<SweepPoint>& points);

/// Shortest text that parses back to the same double; "inf"/"-inf"/"nan" otherwise.
std::string format_double(double v);

}  // namespace lo3d
