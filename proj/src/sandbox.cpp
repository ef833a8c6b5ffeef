#include "lo3d/sandbox.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "lo3d/errors.hpp"
#include "lo3d/kernels.hpp"
#include "lo3d/rng.hpp"

namespace lo3d {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::Vector2d rotate(const Eigen::Vector2d& p, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y()};
}

bool inside_polygon(const std::vector<Eigen::Vector2d>& v, const Eigen::Vector2d& p) {
  bool in = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y() > p.y()) != (v[j].y() > p.y()) &&
        p.x() < (v[j].x() - v[i].x()) * (p.y() - v[i].y()) / (v[j].y() - v[i].y()) + v[i].x())
      in = !in;
  }
  return in;
}

// Point at arc length `t` along a closed polyline.
Eigen::Vector2d along_perimeter(const std::vector<Eigen::Vector2d>& v, double t) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::Vector2d& a = v[i];
    const Eigen::Vector2d& b = v[(i + 1) % v.size()];
    const double len = (b - a).norm();
    if (t <= len || i + 1 == v.size()) return a + (len > 0.0 ? std::min(t, len) / len : 0.0) * (b - a);
    t -= len;
  }
  return v.front();
}

double perimeter(const std::vector<Eigen::Vector2d>& v) {
  double p = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) p += (v[(i + 1) % v.size()] - v[i]).norm();
  return p;
}

std::vector<Eigen::Vector2d> outline(const Shape& s) {
  if (s.kind == Shape::Kind::rectangle) {
    const double w = s.width / 2, h = s.height / 2;
    return {{-w, -h}, {w, -h}, {w, h}, {-w, h}};
  }
  return s.vertices;
}

Eigen::VectorXd state_vector(const Eigen::Vector2d& p, double gripper) {
  Eigen::VectorXd s(3);
  s << p.x(), p.y(), gripper;
  return s;
}

std::string scene_spec_string(const SandboxConfig& c, TaskKind task) {
  std::ostringstream os;
  os.precision(17);
  os << to_string(task) << ' ' << c.ee_radius << ' ' << c.target_radius << ' ' << c.obstacle_radius << ' '
     << c.annulus_inner << ' ' << c.annulus_outer << ' ' << c.start_jitter << ' ' << c.cloud_points << ' '
     << c.q_star_margin << ' ' << c.max_speed << ' ' << c.accel_steps << ' ' << c.via_jitter;
  return os.str();
}

}  // namespace

const char* to_string(TaskKind t) {
  switch (t) {
    case TaskKind::reach: return "reach";
    case TaskKind::reach_with_distractors: return "reach_with_distractors";
    case TaskKind::reach_around: return "reach_around";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "reach") return TaskKind::reach;
  if (s == "reach_with_distractors") return TaskKind::reach_with_distractors;
  if (s == "reach_around") return TaskKind::reach_around;
  throw ConfigError("unknown task '" + s + "' (expected reach|reach_with_distractors|reach_around)");
}

Shape Shape::disc(double r) {
  Shape s;
  s.kind = Kind::disc;
  s.radius = r;
  s.validate();
  return s;
}

Shape Shape::rectangle(double w, double h) {
  Shape s;
  s.kind = Kind::rectangle;
  s.width = w;
  s.height = h;
  s.validate();
  return s;
}

Shape Shape::polygon(std::vector<Eigen::Vector2d> verts) {
  Shape s;
  s.kind = Kind::polygon;
  s.vertices = std::move(verts);
  s.validate();
  return s;
}

double Shape::effective_radius() const {
  switch (kind) {
    case Kind::disc: return radius;
    case Kind::rectangle: return 0.5 * std::hypot(width, height);
    case Kind::polygon: {
      double r = 0.0;
      for (const auto& v : vertices) r = std::max(r, v.norm());
      return r;
    }
  }
  return 0.0;
}

void Shape::validate() const {
  switch (kind) {
    case Kind::disc:
      if (!(radius > 0.0)) throw ParameterError("disc radius must be positive");
      break;
    case Kind::rectangle:
      if (!(width > 0.0 && height > 0.0)) throw ParameterError("rectangle sides must be positive");
      break;
    case Kind::polygon:
      if (vertices.size() < 3) throw ParameterError("polygon needs at least 3 vertices");
      if (!(perimeter(vertices) > 0.0)) throw ParameterError("degenerate polygon");
      break;
  }
}

const SceneObject* Scene::find(const std::string& label) const {
  for (const auto& o : objects)
    if (o.label == label) return &o;
  return nullptr;
}

Eigen::Vector2d Scene::target_position() const {
  for (const auto& l : target_labels)
    if (const auto* o = find(l)) return o->position;
  throw DataError("scene has no target object");
}

void Scene::validate() const {
  std::set<std::string> seen;
  for (const auto& o : objects) {
    if (o.label.empty()) throw DataError("object label must be nonempty");
    if (!seen.insert(o.label).second) throw DataError("duplicate object label '" + o.label + "'");
    o.shape.validate();
    if (!workspace.contains(o.position)) throw DataError("object '" + o.label + "' lies outside the workspace");
  }
  for (const auto& t : target_labels)
    if (std::find(obstacle_labels.begin(), obstacle_labels.end(), t) != obstacle_labels.end())
      throw DataError("label '" + t + "' is both target and obstacle");
  if (!workspace.contains(start)) throw DataError("start lies outside the workspace");
  if (!(ee_radius >= 0.0)) throw DataError("ee_radius must be non-negative");
  if (!(q_star > 0.0)) throw DataError("q_star must be positive");
  if (cloud_points < 1) throw DataError("cloud_points must be positive");
}

void SandboxConfig::validate() const {
  if (!(annulus_inner > 0.0 && annulus_inner <= annulus_outer)) throw ConfigError("invalid target annulus");
  if (!(max_speed > 0.0) || accel_steps < 1) throw ConfigError("invalid expert speed profile");
  if (executed_steps < 1 || max_plans < 1) throw ConfigError("invalid rollout horizon");
  if (cloud_points < 1) throw ConfigError("cloud_points must be positive");
  if (!(success_fraction > 0.0)) throw ConfigError("success_fraction must be positive");
}

Scene generate_scene(TaskKind task, std::uint64_t seed, const SandboxConfig& cfg) {
  cfg.validate();
  Scene sc;
  sc.task = task;
  sc.seed = seed;
  sc.ee_radius = cfg.ee_radius;
  sc.cloud_points = cfg.cloud_points;
  sc.q_star = (cfg.obstacle_radius + cfg.ee_radius) * (1.0 + cfg.q_star_margin);

  // Start and target draw from one stream so every task variant of a seed
  // shares them.
  Rng base(derive_seed(seed, 1));
  sc.start = {base.uniform(-cfg.start_jitter, cfg.start_jitter), base.uniform(-cfg.start_jitter, cfg.start_jitter)};
  const double theta = base.uniform(0.0, kTwoPi);
  const double radius = base.uniform(cfg.annulus_inner, cfg.annulus_outer);
  const Eigen::Vector2d target = sc.start + radius * Eigen::Vector2d(std::cos(theta), std::sin(theta));
  sc.objects.push_back({"red_disc", Shape::disc(cfg.target_radius), target, 0.0});
  sc.target_labels = {"red_disc"};

  if (task == TaskKind::reach_with_distractors) {
    Rng rng(derive_seed(seed, 2));
    static const char* kNames[] = {"blue_disc", "green_disc", "yellow_disc"};
    const int count = rng.uniform_int(1, 3);
    const double margin = 0.1;
    for (int i = 0; i < count; ++i) {
      Eigen::Vector2d p;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        p = {rng.uniform(sc.workspace.lo.x() + margin, sc.workspace.hi.x() - margin),
             rng.uniform(sc.workspace.lo.y() + margin, sc.workspace.hi.y() - margin)};
        bool ok = (p - target).norm() >= 0.25 && (p - sc.start).norm() >= 0.15;
        for (const auto& o : sc.objects) ok = ok && (p - o.position).norm() >= 0.15;
        if (ok) break;
      }
      sc.objects.push_back({kNames[i], Shape::disc(cfg.target_radius), p, 0.0});
    }
  } else if (task == TaskKind::reach_around) {
    Rng rng(derive_seed(seed, 3));
    const Eigen::Vector2d dir = (target - sc.start).normalized();
    const Eigen::Vector2d perp(-dir.y(), dir.x());
    const double along = rng.uniform(0.45, 0.55);
    const double lateral = rng.uniform(-cfg.ee_radius, cfg.ee_radius);
    const Eigen::Vector2d p = sc.start + along * (target - sc.start) + lateral * perp;
    sc.objects.push_back({"kettle", Shape::disc(cfg.obstacle_radius), p, 0.0});
    sc.obstacle_labels = {"kettle"};
  }
  sc.validate();
  return sc;
}

Eigen::MatrixXd sample_object_cloud(const Shape& shape, int n_points, std::uint64_t seed,
                                    const Eigen::Vector2d& position, double yaw) {
  shape.validate();
  if (n_points < 1) throw ParameterError("cloud needs at least one point");
  Rng rng(seed);
  const int n_boundary = n_points / 2;
  Eigen::MatrixXd cloud(n_points, 2);
  for (int i = 0; i < n_points; ++i) {
    const bool boundary = i < n_boundary;
    Eigen::Vector2d local;
    if (shape.kind == Shape::Kind::disc) {
      const double a = rng.uniform(0.0, kTwoPi);
      const double r = boundary ? shape.radius : shape.radius * std::sqrt(rng.uniform(0.0, 1.0));
      local = {r * std::cos(a), r * std::sin(a)};
    } else {
      const auto verts = outline(shape);
      if (boundary) {
        local = along_perimeter(verts, rng.uniform(0.0, perimeter(verts)));
      } else {
        Eigen::Vector2d lo = verts.front(), hi = verts.front();
        for (const auto& v : verts) {
          lo = lo.cwiseMin(v);
          hi = hi.cwiseMax(v);
        }
        do {
          local = {rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y())};
        } while (!inside_polygon(verts, local));
      }
    }
    cloud.row(i) = (position + rotate(local, yaw)).transpose();
  }
  return cloud;
}

Eigen::MatrixXd object_cloud(const Scene& scene, const SceneObject& object) {
  return sample_object_cloud(object.shape, scene.cloud_points, derive_seed(scene.seed, hash_string(object.label)),
                             object.position, object.yaw);
}

std::optional<Eigen::MatrixXd> labelled_cloud(const Scene& scene, const std::vector<std::string>& labels) {
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index total = 0;
  std::string key;
  for (const auto& l : labels) {
    if (const auto* o = scene.find(l)) {
      parts.push_back(object_cloud(scene, *o));
      total += parts.back().rows();
      key += l;
      key += '\n';
    }
  }
  if (parts.empty()) return std::nullopt;
  Eigen::MatrixXd all(total, 2);
  Eigen::Index row = 0;
  for (const auto& p : parts) {
    all.middleRows(row, p.rows()) = p;
    row += p.rows();
  }
  const Eigen::Index P = scene.cloud_points;
  if (total == P) return all;
  Eigen::MatrixXd out(P, 2);
  if (total < P) {
    for (Eigen::Index i = 0; i < P; ++i) out.row(i) = all.row(i % total);
    return out;
  }
  // Seeded subset without replacement, kept in source order.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(total));
  for (Eigen::Index i = 0; i < total; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(scene.seed, hash_string(key)));
  for (Eigen::Index i = 0; i < P; ++i) {
    const int j = rng.uniform_int(static_cast<int>(i), static_cast<int>(total - 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::sort(idx.begin(), idx.begin() + P);
  for (Eigen::Index i = 0; i < P; ++i) out.row(i) = all.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

std::optional<Observation> observe(const Scene& scene, const std::vector<std::string>& labels,
                                   const std::vector<Eigen::Vector2d>& ee_history, double gripper) {
  if (ee_history.empty()) throw ParameterError("observe needs at least one end-effector position");
  const auto cloud = labelled_cloud(scene, labels);
  if (!cloud) return std::nullopt;
  Observation obs;
  for (const auto& p : ee_history) {
    obs.clouds.push_back(*cloud);
    obs.states.push_back(state_vector(p, gripper));
  }
  return obs;
}

std::vector<Eigen::MatrixXd> obstacle_clouds(const Scene& scene) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& l : scene.obstacle_labels)
    if (const auto* o = scene.find(l)) out.push_back(object_cloud(scene, *o));
  return out;
}

std::vector<Eigen::Vector2d> scripted_expert(const Scene& scene, const SandboxConfig& cfg, std::uint64_t seed) {
  const Eigen::Vector2d p0 = scene.start;
  const Eigen::Vector2d p1 = scene.target_position();
  const double L = (p1 - p0).norm();
  if (L == 0.0) return {p0};
  const Eigen::Vector2d dir = (p1 - p0) / L;
  const Eigen::Vector2d perp(-dir.y(), dir.x());
  const double v = cfg.max_speed;
  const double a = v / cfg.accel_steps;
  const bool cruise = L >= v * v / a;
  const double T = cruise ? L / v + v / a : 2.0 * std::sqrt(L / a);
  const int N = std::max(1, static_cast<int>(std::ceil(T)));
  const double dt = T / N;

  auto progress = [&](double tau) {
    if (cruise) {
      const double ta = v / a;
      if (tau < ta) return 0.5 * a * tau * tau;
      if (tau < T - ta) return 0.5 * a * ta * ta + v * (tau - ta);
      return L - 0.5 * a * (T - tau) * (T - tau);
    }
    if (tau < T / 2) return 0.5 * a * tau * tau;
    return L - 0.5 * a * (T - tau) * (T - tau);
  };

  Rng rng(seed);
  const double amp = cfg.via_jitter * rng.normal();
  std::vector<Eigen::Vector2d> path;
  path.reserve(static_cast<std::size_t>(N) + 1);
  for (int t = 0; t <= N; ++t) {
    const double s = std::clamp(progress(t * dt), 0.0, L);
    path.push_back(p0 + s * dir + amp * std::sin(std::numbers::pi * s / L) * perp);
  }
  path.front() = p0;
  path.back() = p1;
  return path;
}

EpisodeResult rollout(const Policy& policy, const Scene& scene, const GuidanceConfig& guidance,
                      const SamplerConfig& sampler, const SandboxConfig& cfg, std::uint64_t seed,
                      EpisodeTrace* trace, bool skip_last) {
  const auto& dims = policy.params.dims;
  if (dims.point_dim != 2 || dims.action_dim < 2) throw ParameterError("sandbox policies act in the plane");
  if (cfg.executed_steps > dims.horizon) throw ConfigError("executed steps exceed the prediction horizon");
  sampler.validate(policy.schedule);

  GuidanceConfig gcfg = guidance;
  if (gcfg.q_star <= 0.0) gcfg.q_star = scene.q_star;
  const bool guided = gcfg.mode != GuidanceMode::none;
  if (guided) gcfg.validate(dims.action_dim);

  const std::vector<Eigen::MatrixXd> obstacles = obstacle_clouds(scene);
  const Eigen::Vector2d goal = scene.target_position();
  const double success_radius = cfg.success_fraction * scene.workspace.extent();

  EpisodeResult res;
  res.min_clearance = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  Eigen::Vector2d ee = scene.start;
  std::vector<Eigen::Vector2d> history(static_cast<std::size_t>(dims.obs_horizon), ee);
  std::vector<Eigen::Vector2d> path{ee};
  double total_ms = 0.0;

  while (res.plans_issued < cfg.max_plans && !res.success) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto obs = observe(scene, scene.target_labels, history);
    if (!obs) break;
    const Observation nobs = normalize_observation(policy.stats, *obs);
    const ConditionedDenoiser model(policy.params, policy.schedule, nobs);

    std::optional<Guidance> guide;
    if (guided && !obstacles.empty()) {
      const auto closest = closest_point(obstacles, Eigen::VectorXd(ee));
      ++res.guidance_evaluations;
      if (closest) guide = Guidance{gcfg, *closest, policy.stats.action};
    }

    Trajectory plan;
    SampleDiagnostics diag;
    try {
      plan = guided_sample(policy.schedule, model, guide ? &*guide : nullptr, sampler, dims.horizon, dims.action_dim,
                           rng, skip_last, &diag);
    } catch (const SamplerDivergence&) {
      res.diverged = true;
      ++res.plans_issued;
      break;
    }
    res.guidance_evaluations += diag.guidance_evaluations;
    res.fallbacks += diag.fallbacks;
    const Trajectory world = policy.stats.action.unnormalize_rows(plan);
    if (!world.allFinite()) {
      res.diverged = true;
      ++res.plans_issued;
      break;
    }
    total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ++res.plans_issued;
    if (trace) trace->plans.push_back(world);

    for (int j = 0; j < cfg.executed_steps; ++j) {
      const Eigen::Vector2d next(world(j, 0), world(j, 1));
      if (!obstacles.empty()) {
        const double clearance =
            kernels::segment_cloud_distance_serial(obstacles, Eigen::VectorXd(ee), Eigen::VectorXd(next)) -
            scene.ee_radius;
        res.min_clearance = std::min(res.min_clearance, clearance);
        if (clearance <= 0.0) res.collided = true;
      }
      res.path_length += (next - ee).norm();
      ee = next;
      path.push_back(ee);
      history.erase(history.begin());
      history.push_back(ee);
      if ((ee - goal).norm() <= success_radius) {
        res.success = true;
        break;
      }
    }
  }

  for (std::size_t i = 1; i + 1 < path.size(); ++i) res.smoothness += (path[i + 1] - 2.0 * path[i] + path[i - 1]).squaredNorm();
  res.final_distance = (ee - goal).norm();
  res.wall_ms_per_plan = res.plans_issued > 0 ? total_ms / res.plans_issued : 0.0;
  if (trace) trace->executed = std::move(path);
  return res;
}

EvalSummary summarize(const std::vector<EvalRow>& rows) {
  EvalSummary s;
  s.episodes = rows.size();
  if (rows.empty()) return s;
  double clear_sum = 0.0;
  std::size_t clear_n = 0;
  for (const auto& r : rows) {
    const auto& e = r.result;
    s.success_rate += e.success ? 1.0 : 0.0;
    s.collision_rate += e.collided ? 1.0 : 0.0;
    s.mean_smoothness += e.smoothness;
    s.mean_path_length += e.path_length;
    s.mean_plans += e.plans_issued;
    s.mean_wall_ms_per_plan += e.wall_ms_per_plan;
    if (std::isfinite(e.min_clearance)) {
      clear_sum += e.min_clearance;
      ++clear_n;
    }
  }
  const double n = static_cast<double>(rows.size());
  s.success_rate /= n;
  s.collision_rate /= n;
  s.mean_smoothness /= n;
  s.mean_path_length /= n;
  s.mean_plans /= n;
  s.mean_wall_ms_per_plan /= n;
  s.mean_min_clearance = clear_n ? clear_sum / static_cast<double>(clear_n) : std::numeric_limits<double>::infinity();
  return s;
}

namespace {

template <class Mapper>
EvalTable evaluate_with(const Policy& policy, const std::vector<Scene>& scenes, const EvalOptions& opts,
                        Mapper&& map) {
  const std::size_t per_scene = opts.seeds.size();
  EvalTable table;
  table.rows = map(scenes.size() * per_scene, [&](std::size_t i) {
    const std::size_t si = i / per_scene;
    const std::uint64_t seed = opts.seeds[i % per_scene];
    EvalRow row;
    row.scene_index = si;
    row.scene_seed = scenes[si].seed;
    row.rollout_seed = derive_seed(scenes[si].seed, seed);
    row.result = rollout(policy, scenes[si], opts.guidance, opts.sampler, opts.sandbox, row.rollout_seed, nullptr,
                         opts.skip_last);
    return row;
  });
  table.summary = summarize(table.rows);
  return table;
}

}  // namespace

EvalTable evaluate(const Policy& policy, const std::vector<Scene>& scenes, const EvalOptions& opts) {
  return evaluate_with(policy, scenes, opts, [](std::size_t n, auto&& f) { return kernels::map_parallel(n, f); });
}

EvalTable evaluate_serial(const Policy& policy, const std::vector<Scene>& scenes, const EvalOptions& opts) {
  return evaluate_with(policy, scenes, opts, [](std::size_t n, auto&& f) { return kernels::map_serial(n, f); });
}

DemoDataset collect_demos(const CollectConfig& collect, const SandboxConfig& cfg) {
  if (collect.episodes < 0 || collect.horizon < 1 || collect.obs_horizon < 1)
    throw ConfigError("invalid collection settings");
  DemoDataset d;
  d.point_dim = 2;
  d.num_points = static_cast<std::uint32_t>(cfg.cloud_points);
  d.state_dim = 3;
  d.action_dim = 2;
  d.meta.scene_spec_hash = hash_string(scene_spec_string(cfg, collect.task));
  d.meta.collect_seed = collect.seed;
  d.meta.task = static_cast<std::uint32_t>(collect.task);
  d.meta.horizon = static_cast<std::uint32_t>(collect.horizon);
  d.meta.executed = static_cast<std::uint32_t>(cfg.executed_steps);
  d.meta.obs_horizon = static_cast<std::uint32_t>(collect.obs_horizon);

  for (int i = 0; i < collect.episodes; ++i) {
    const std::uint64_t scene_seed = derive_seed(collect.seed, static_cast<std::uint64_t>(i));
    Scene scene = generate_scene(collect.task, scene_seed, cfg);
    // Demonstrations never contain obstacles.
    for (const auto& l : scene.obstacle_labels)
      std::erase_if(scene.objects, [&](const SceneObject& o) { return o.label == l; });
    scene.obstacle_labels.clear();

    std::vector<Eigen::Vector2d> positions = scripted_expert(scene, cfg, derive_seed(scene_seed, 7));
    while (static_cast<int>(positions.size()) < collect.horizon) positions.push_back(positions.back());
    const Eigen::MatrixXd cloud = *labelled_cloud(scene, scene.target_labels);

    DemoEpisode ep;
    ep.scene_seed = scene_seed;
    ep.steps = static_cast<std::uint32_t>(positions.size());
    for (std::size_t t = 0; t < positions.size(); ++t) {
      for (Eigen::Index r = 0; r < cloud.rows(); ++r)
        for (Eigen::Index c = 0; c < cloud.cols(); ++c) ep.clouds.push_back(static_cast<float>(cloud(r, c)));
      ep.states.push_back(static_cast<float>(positions[t].x()));
      ep.states.push_back(static_cast<float>(positions[t].y()));
      ep.states.push_back(0.0f);
      const Eigen::Vector2d& next = positions[std::min(t + 1, positions.size() - 1)];
      ep.actions.push_back(static_cast<float>(next.x()));
      ep.actions.push_back(static_cast<float>(next.y()));
    }
    d.episodes.push_back(std::move(ep));
  }
  if (!d.episodes.empty()) d.stats = compute_stats(d);
  return d;
}

std::vector<TrainingExample> training_examples(const DemoDataset& data, int horizon, int obs_horizon) {
  if (horizon < 1 || obs_horizon < 1) throw ParameterError("invalid horizons");
  const auto P = static_cast<Eigen::Index>(data.num_points);
  const auto d = static_cast<Eigen::Index>(data.point_dim);
  const auto S = static_cast<Eigen::Index>(data.state_dim);
  const auto A = static_cast<Eigen::Index>(data.action_dim);
  std::vector<TrainingExample> out;
  for (const auto& ep : data.episodes) {
    const int steps = static_cast<int>(ep.steps);
    auto cloud_at = [&](int t) {
      Eigen::MatrixXd c(P, d);
      const std::size_t base = static_cast<std::size_t>(t) * static_cast<std::size_t>(P * d);
      for (Eigen::Index r = 0; r < P; ++r)
        for (Eigen::Index j = 0; j < d; ++j) c(r, j) = ep.clouds[base + static_cast<std::size_t>(r * d + j)];
      return data.stats.cloud.normalize_rows(c);
    };
    auto state_at = [&](int t) {
      Eigen::VectorXd s(S);
      for (Eigen::Index j = 0; j < S; ++j) s[j] = ep.states[static_cast<std::size_t>(t * S + j)];
      return data.stats.state.normalize(s);
    };
    for (int t = 0; t < steps; ++t) {
      TrainingExample ex;
      for (int f = 0; f < obs_horizon; ++f) {
        const int src = std::max(0, t - (obs_horizon - 1 - f));
        ex.obs.clouds.push_back(cloud_at(src));
        ex.obs.states.push_back(state_at(src));
      }
      Eigen::MatrixXd chunk(horizon, A);
      for (int j = 0; j < horizon; ++j) {
        const int src = std::min(t + j, steps - 1);
        for (Eigen::Index c = 0; c < A; ++c) chunk(j, c) = ep.actions[static_cast<std::size_t>(src * A + c)];
      }
      ex.actions = data.stats.action.normalize_rows(chunk);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace lo3d
