#pragma once

#include <filesystem>
#include <iosfwd>

#include "lo3d/sandbox.hpp"

namespace lo3d {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Schedule parameters stored alongside the weights so a checkpoint is
/// self-contained.
struct ScheduleSpec {
  int K = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;

  NoiseSchedule build() const { return make_schedule(K, ScheduleKind::linear, beta_start, beta_end); }
  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

struct Checkpoint {
  DenoiserParams params;
  NormalizationStats stats;
  ScheduleSpec schedule;

  Policy policy() const { return {params, stats, schedule.build()}; }
};

// Layout (little endian):
//   "LO3D" u32 version "CKPT"
//   u8 prediction_type, u8 encoder_mode
//   u32 horizon, action_dim, point_dim, state_dim, obs_horizon, num_points,
//       point_hidden, feature_dim, time_embed_dim, trunk layer count, trunk widths[]
//   u32 K, f64 beta_start, f64 beta_end
//   stats as f64: action min[] max[], state min[] max[], cloud min[] max[]
//   u64 parameter count, then every layer's W (row-major) and b as f64
void write_checkpoint(const Checkpoint& ckpt, std::ostream& os);
Checkpoint read_checkpoint(std::istream& is);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace lo3d
