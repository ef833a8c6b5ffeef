#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "lo3d/checkpoint.hpp"
#include "lo3d/sandbox.hpp"

namespace lo3d {

struct EvalSettings {
  TaskKind task = TaskKind::reach_around;
  int scenes = 50;
  std::vector<std::uint64_t> rollout_seeds = {0};
};

/// Everything a CLI run needs. The JSON schema is the tree returned by
/// default_config_json(); every leaf key is also a `--section.key` flag.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  ScheduleSpec schedule;
  DenoiserDims dims;
  PredictionType prediction = PredictionType::epsilon;
  EncoderMode encoder = EncoderMode::mlp_residual;
  SamplerConfig sampler;   // steps == 0 in the file means "all K steps"
  GuidanceConfig guidance; // q_star <= 0 means "the scene's value"
  bool rho_absolute = false;  // otherwise rho is a multiple of rho_base_scale
  bool skip_last = false;
  SandboxConfig sandbox;
  TrainConfig training;
  int log_every = 500;
  int demo_episodes = 200;
  TaskKind demo_task = TaskKind::reach;
  EvalSettings eval;
  std::vector<double> sweep_grid = {0.0, 0.5, 1.0, 2.0, 5.0, 10.0};

  CollectConfig collect_config() const;
  std::uint64_t init_seed() const;
  /// Held-out evaluation scenes; disjoint seed stream from the demo scenes.
  std::vector<Scene> eval_scenes() const;
  std::vector<Scene> eval_scenes(TaskKind task) const;
  /// Evaluation options with rho converted to the sampler's units for `policy`.
  EvalOptions eval_options(const Policy& policy) const;
  EvalOptions eval_options(const Policy& policy, double rho) const;
};

nlohmann::json default_config_json();
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Merges `j` over the defaults. Unknown keys, wrong types and invalid values
/// raise ConfigError naming the dotted key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every dotted leaf key of the schema, e.g. "guidance.rho".
std::vector<std::string> config_keys();

/// Sets one dotted key from command-line text, typed by the schema default.
void apply_override(nlohmann::json& j, const std::string& dotted_key, const std::string& value);

/// Rho that moves a waypoint inside Q* by roughly Q* world units per
/// denoising step: Q* / S^2, S the mean action half range.
double rho_base_scale(double q_star, const MinMax& action_stats);

/// Q* used for base-scale calibration when the config leaves it to the scene.
double reference_q_star(const ExperimentConfig& cfg);

}  // namespace lo3d
