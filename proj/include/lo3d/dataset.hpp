#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "lo3d/normalization.hpp"

namespace lo3d {

/// One demonstration: per control step, the observed cloud, the robot state
/// and the executed action (next commanded end-effector position).
struct DemoEpisode {
  std::uint64_t scene_seed = 0;
  std::uint32_t steps = 0;
  std::vector<float> clouds;   // steps x num_points x point_dim
  std::vector<float> states;   // steps x state_dim
  std::vector<float> actions;  // steps x action_dim

  friend bool operator==(const DemoEpisode&, const DemoEpisode&) = default;
};

struct DemoMetadata {
  std::uint64_t scene_spec_hash = 0;
  std::uint64_t collect_seed = 0;
  std::uint32_t task = 0;
  std::uint32_t horizon = 16;
  std::uint32_t executed = 8;
  std::uint32_t obs_horizon = 2;

  friend bool operator==(const DemoMetadata&, const DemoMetadata&) = default;
};

struct DemoDataset {
  std::uint32_t point_dim = 2;
  std::uint32_t num_points = 64;
  std::uint32_t state_dim = 3;
  std::uint32_t action_dim = 2;
  DemoMetadata meta;
  NormalizationStats stats;
  std::vector<DemoEpisode> episodes;

  friend bool operator==(const DemoDataset& a, const DemoDataset& b) {
    return a.point_dim == b.point_dim && a.num_points == b.num_points && a.state_dim == b.state_dim &&
           a.action_dim == b.action_dim && a.meta == b.meta && a.stats == b.stats && a.episodes == b.episodes;
  }
};

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Min-max statistics over every stored action, state and cloud point.
NormalizationStats compute_stats(const DemoDataset& data);

void write_dataset(const DemoDataset& data, std::ostream& os);
DemoDataset read_dataset(std::istream& is);
void write_dataset(const DemoDataset& data, const std::filesystem::path& path);
DemoDataset read_dataset(const std::filesystem::path& path);

}  // namespace lo3d
