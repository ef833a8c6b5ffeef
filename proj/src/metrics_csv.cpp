#include "lo3d/metrics_csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace lo3d {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string eval_csv_header(bool timing) {
  std::string h =
      "scene_index,scene_seed,rollout_seed,success,collided,diverged,min_clearance,path_length,smoothness,"
      "plans_issued,final_distance,guidance_evaluations,fallbacks";
  if (timing) h += ",wall_ms_per_plan";
  return h;
}

std::string eval_csv_row(const EvalRow& row, bool timing) {
  const auto& e = row.result;
  std::ostringstream os;
  os << row.scene_index << ',' << row.scene_seed << ',' << row.rollout_seed << ',' << (e.success ? 1 : 0) << ','
     << (e.collided ? 1 : 0) << ',' << (e.diverged ? 1 : 0) << ',' << format_double(e.min_clearance) << ','
     << format_double(e.path_length) << ',' << format_double(e.smoothness) << ',' << e.plans_issued << ','
     << format_double(e.final_distance) << ',' << e.guidance_evaluations << ',' << e.fallbacks;
  if (timing) os << ',' << format_double(e.wall_ms_per_plan);
  return os.str();
}

std::string eval_csv(const EvalTable& table, bool timing) {
  std::string out = eval_csv_header(timing) + "\n";
  for (const auto& r : table.rows) out += eval_csv_row(r, timing) + "\n";
  return out;
}

std::string summary_line(const EvalSummary& s, bool timing) {
  std::ostringstream os;
  os << "episodes=" << s.episodes << " success_rate=" << format_double(s.success_rate)
     << " collision_rate=" << format_double(s.collision_rate)
     << " mean_min_clearance=" << format_double(s.mean_min_clearance)
     << " mean_smoothness=" << format_double(s.mean_smoothness)
     << " mean_path_length=" << format_double(s.mean_path_length) << " mean_plans=" << format_double(s.mean_plans);
  if (timing) os << " mean_wall_ms_per_plan=" << format_double(s.mean_wall_ms_per_plan);
  return os.str();
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << "rho,rho_abs,episodes,success_rate,collision_rate,mean_min_clearance,mean_smoothness,mean_path_length\n";
  for (const auto& p : points) {
    const auto& s = p.summary;
    os << format_double(p.rho) << ',' << format_double(p.rho_abs) << ',' << s.episodes << ','
       << format_double(s.success_rate) << ',' << format_double(s.collision_rate) << ','
       << format_double(s.mean_min_clearance) << ',' << format_double(s.mean_smoothness) << ','
       << format_double(s.mean_path_length) << '\n';
  }
  return os.str();
}

}  // namespace lo3d
