#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lo3d/dataset.hpp"
#include "lo3d/denoiser.hpp"
#include "lo3d/obstacle_cost.hpp"
#include "lo3d/sampler.hpp"
#include "lo3d/schedule.hpp"
#include "lo3d/training.hpp"

namespace lo3d {

enum class TaskKind { reach, reach_with_distractors, reach_around };

const char* to_string(TaskKind t);
TaskKind parse_task_kind(const std::string& s);

struct Shape {
  enum class Kind { disc, rectangle, polygon };
  Kind kind = Kind::disc;
  double radius = 0.0;                    // disc
  double width = 0.0, height = 0.0;       // rectangle, axis aligned in the object frame
  std::vector<Eigen::Vector2d> vertices;  // polygon, counter-clockwise, object frame

  static Shape disc(double r);
  static Shape rectangle(double w, double h);
  static Shape polygon(std::vector<Eigen::Vector2d> verts);

  /// Radius of the smallest origin-centred circle containing the shape.
  double effective_radius() const;
  void validate() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

struct SceneObject {
  std::string label;
  Shape shape;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double yaw = 0.0;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Workspace {
  Eigen::Vector2d lo{-1.0, -1.0};
  Eigen::Vector2d hi{1.0, 1.0};

  double extent() const { return (hi - lo).maxCoeff(); }
  bool contains(const Eigen::Vector2d& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  friend bool operator==(const Workspace&, const Workspace&) = default;
};

struct Scene {
  TaskKind task = TaskKind::reach;
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;
  std::vector<std::string> target_labels;
  std::vector<std::string> obstacle_labels;
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  double ee_radius = 0.02;
  Workspace workspace;
  double q_star = 0.1;
  int cloud_points = 64;

  const SceneObject* find(const std::string& label) const;
  /// Centroid of the first target object.
  Eigen::Vector2d target_position() const;
  void validate() const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Knobs of the desk-scale world. Defaults are the values the test suites use.
struct SandboxConfig {
  double ee_radius = 0.02;
  double target_radius = 0.05;
  double obstacle_radius = 0.1;
  double annulus_inner = 0.5;
  double annulus_outer = 0.8;
  double start_jitter = 0.1;
  int cloud_points = 64;
  double q_star_margin = 0.2;  // Q* = (obstacle radius + ee radius) * (1 + margin)

  double max_speed = 0.04;     // world units per control step
  int accel_steps = 4;
  double via_jitter = 0.02;    // std of the mid-path lateral offset

  int executed_steps = 8;      // m
  int max_plans = 20;
  double success_fraction = 0.05;  // success radius = fraction * workspace extent

  void validate() const;
};

Scene generate_scene(TaskKind task, std::uint64_t seed, const SandboxConfig& cfg = {});

/// Uniform samples: half on the boundary, half in the interior, in world
/// coordinates of an object posed at (position, yaw).
Eigen::MatrixXd sample_object_cloud(const Shape& shape, int n_points, std::uint64_t seed,
                                    const Eigen::Vector2d& position = Eigen::Vector2d::Zero(), double yaw = 0.0);

/// The deterministic cloud of one scene object (seeded by scene seed and label).
Eigen::MatrixXd object_cloud(const Scene& scene, const SceneObject& object);

/// Expert end-effector positions p_0 = start ... p_N = target: straight line,
/// trapezoidal speed, lateral sine bump of seeded amplitude.
std::vector<Eigen::Vector2d> scripted_expert(const Scene& scene, const SandboxConfig& cfg, std::uint64_t seed);

/// Object-centric observation in world units: only objects whose label is in
/// `labels` contribute points. `ee_history` holds the last T_o end-effector
/// positions, oldest first. nullopt when no label matches.
std::optional<Observation> observe(const Scene& scene, const std::vector<std::string>& labels,
                                   const std::vector<Eigen::Vector2d>& ee_history, double gripper = 0.0);

/// Concatenated clouds of the labelled objects, downsampled to scene.cloud_points.
std::optional<Eigen::MatrixXd> labelled_cloud(const Scene& scene, const std::vector<std::string>& labels);

/// Obstacle clouds of the scene (one matrix per obstacle label present).
std::vector<Eigen::MatrixXd> obstacle_clouds(const Scene& scene);

/// Trained network plus everything needed to run it.
struct Policy {
  DenoiserParams params;
  NormalizationStats stats;
  NoiseSchedule schedule;
};

struct EpisodeResult {
  bool success = false;
  bool collided = false;
  bool diverged = false;
  double min_clearance = 0.0;  // +inf without obstacles
  double path_length = 0.0;
  double smoothness = 0.0;     // sum of squared second differences of the executed path
  int plans_issued = 0;
  double wall_ms_per_plan = 0.0;
  double final_distance = 0.0;
  int guidance_evaluations = 0;  // closest-point queries plus guidance gradient evaluations
  int fallbacks = 0;
};

struct EpisodeTrace {
  std::vector<Eigen::Vector2d> executed;
  std::vector<Trajectory> plans;  // world units
};

/// Receding-horizon closed loop: observe, refresh C_ob, sample, execute the
/// first m waypoints, check collisions on each executed segment. Stops on
/// success or after max_plans. `guidance.q_star <= 0` means use the scene value.
EpisodeResult rollout(const Policy& policy, const Scene& scene, const GuidanceConfig& guidance,
                      const SamplerConfig& sampler, const SandboxConfig& cfg, std::uint64_t seed,
                      EpisodeTrace* trace = nullptr, bool skip_last = false);

struct EvalRow {
  std::size_t scene_index = 0;
  std::uint64_t scene_seed = 0;
  std::uint64_t rollout_seed = 0;
  EpisodeResult result;
};

struct EvalSummary {
  std::size_t episodes = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double mean_min_clearance = 0.0;
  double mean_smoothness = 0.0;
  double mean_path_length = 0.0;
  double mean_plans = 0.0;
  double mean_wall_ms_per_plan = 0.0;
};

struct EvalTable {
  std::vector<EvalRow> rows;
  EvalSummary summary;
};

struct EvalOptions {
  GuidanceConfig guidance;
  SamplerConfig sampler;
  SandboxConfig sandbox;
  std::vector<std::uint64_t> seeds = {0};  // rollout seeds; every scene runs once per seed
  bool skip_last = false;
};

EvalSummary summarize(const std::vector<EvalRow>& rows);

/// Episodes fan out over OpenMP threads; rows are returned in (scene, seed) order.
EvalTable evaluate(const Policy& policy, const std::vector<Scene>& scenes, const EvalOptions& opts);
/// Serial reference of evaluate.
EvalTable evaluate_serial(const Policy& policy, const std::vector<Scene>& scenes, const EvalOptions& opts);

struct CollectConfig {
  int episodes = 200;
  std::uint64_t seed = 0;
  TaskKind task = TaskKind::reach;
  int horizon = 16;
  int obs_horizon = 2;
};

/// Scripted demonstrations on obstacle-free scenes.
DemoDataset collect_demos(const CollectConfig& collect, const SandboxConfig& cfg);

/// Normalized (observation, action chunk) pairs for every step of every episode.
std::vector<TrainingExample> training_examples(const DemoDataset& data, int horizon, int obs_horizon);

}  // namespace lo3d
