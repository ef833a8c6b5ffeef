#include "lo3d/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "lo3d/errors.hpp"
#include "lo3d/rng.hpp"

namespace lo3d {

using nlohmann::json;

namespace {

json sandbox_json(const SandboxConfig& s) {
  return {{"ee_radius", s.ee_radius},
          {"target_radius", s.target_radius},
          {"obstacle_radius", s.obstacle_radius},
          {"annulus_inner", s.annulus_inner},
          {"annulus_outer", s.annulus_outer},
          {"start_jitter", s.start_jitter},
          {"cloud_points", s.cloud_points},
          {"q_star_margin", s.q_star_margin},
          {"max_speed", s.max_speed},
          {"accel_steps", s.accel_steps},
          {"via_jitter", s.via_jitter},
          {"executed_steps", s.executed_steps},
          {"max_plans", s.max_plans},
          {"success_fraction", s.success_fraction}};
}

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

bool compatible(const json& def, const json& v) {
  if (def.is_object()) return v.is_object();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    if (def.empty()) return true;
    for (const auto& e : v)
      if (!compatible(def.front(), e)) return false;
    return true;
  }
  return false;
}

const char* type_name(const json& def) {
  if (def.is_object()) return "an object";
  if (def.is_boolean()) return "a boolean";
  if (def.is_string()) return "a string";
  if (def.is_number_float()) return "a number";
  if (def.is_number_unsigned()) return "a non-negative integer";
  if (def.is_number_integer()) return "an integer";
  if (def.is_array()) return "an array";
  return "a value";
}

void merge_checked(json& base, const json& over, const std::string& prefix) {
  if (!over.is_object()) throw ConfigError("config" + (prefix.empty() ? "" : " '" + prefix + "'") + " must be an object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string path = join_path(prefix, it.key());
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
    json& slot = base[it.key()];
    if (!compatible(slot, it.value())) throw ConfigError("config key '" + path + "' must be " + type_name(slot));
    if (slot.is_object())
      merge_checked(slot, it.value(), path);
    else
      slot = it.value();
  }
}

void collect_keys(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = join_path(prefix, it.key());
    if (it.value().is_object())
      collect_keys(it.value(), path, out);
    else
      out.push_back(path);
  }
}

template <class T>
T get(const json& j, const char* section, const char* key) {
  return j.at(section).at(key).get<T>();
}

template <class F>
auto with_key(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json trunk = json::array();
  for (int h : c.dims.trunk_hidden) trunk.push_back(h);
  json seeds = json::array();
  for (auto s : c.eval.rollout_seeds) seeds.push_back(s);
  json grid = json::array();
  for (double g : c.sweep_grid) grid.push_back(g);
  json mask = json::array();
  for (int m : c.guidance.coord_mask) mask.push_back(m);
  return {
      {"seed", c.seed},
      {"schedule", {{"K", c.schedule.K}, {"beta_start", c.schedule.beta_start}, {"beta_end", c.schedule.beta_end}}},
      {"denoiser",
       {{"prediction", to_string(c.prediction)},
        {"encoder", to_string(c.encoder)},
        {"horizon", c.dims.horizon},
        {"obs_horizon", c.dims.obs_horizon},
        {"point_hidden", c.dims.point_hidden},
        {"feature_dim", c.dims.feature_dim},
        {"time_embed_dim", c.dims.time_embed_dim},
        {"trunk_hidden", trunk}}},
      {"sampler",
       {{"kind", to_string(c.sampler.kind)},
        {"steps", c.sampler.steps},
        {"eta", c.sampler.eta},
        {"clamp_clean", c.sampler.clamp_clean}}},
      {"guidance",
       {{"mode", to_string(c.guidance.mode)},
        {"grad_mode", to_string(c.guidance.grad_mode)},
        {"rho", c.guidance.rho},
        {"rho_units", c.rho_absolute ? "absolute" : "base"},
        {"q_star", c.guidance.q_star},
        {"coord_mask", mask},
        {"skip_last", c.skip_last}}},
      {"sandbox", sandbox_json(c.sandbox)},
      {"training",
       {{"steps", c.training.steps},
        {"batch_size", c.training.batch_size},
        {"lr", c.training.adam.lr},
        {"beta1", c.training.adam.beta1},
        {"beta2", c.training.adam.beta2},
        {"loss_window", c.training.loss_window},
        {"log_every", c.log_every}}},
      {"collect", {{"episodes", c.demo_episodes}, {"task", to_string(c.demo_task)}}},
      {"eval", {{"task", to_string(c.eval.task)}, {"scenes", c.eval.scenes}, {"rollout_seeds", seeds}}},
      {"sweep", {{"grid", grid}}},
  };
}

json default_config_json() {
  ExperimentConfig c;
  c.sampler.steps = 0;
  c.guidance.q_star = 0.0;
  c.guidance.rho = 1.0;
  return to_json(c);
}

ExperimentConfig parse_config(const json& user) {
  json j = default_config_json();
  merge_checked(j, user, "");

  ExperimentConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();

  c.schedule.K = get<int>(j, "schedule", "K");
  c.schedule.beta_start = get<double>(j, "schedule", "beta_start");
  c.schedule.beta_end = get<double>(j, "schedule", "beta_end");
  if (c.schedule.K < 1) throw ConfigError("config key 'schedule.K' must be >= 1");
  if (!(c.schedule.beta_start > 0.0 && c.schedule.beta_start <= c.schedule.beta_end && c.schedule.beta_end < 1.0))
    throw ConfigError("config keys 'schedule.beta_start'/'schedule.beta_end' must satisfy 0 < start <= end < 1");

  c.prediction = with_key("denoiser.prediction", [&] { return parse_prediction_type(get<std::string>(j, "denoiser", "prediction")); });
  c.encoder = with_key("denoiser.encoder", [&] { return parse_encoder_mode(get<std::string>(j, "denoiser", "encoder")); });
  c.dims.horizon = get<int>(j, "denoiser", "horizon");
  c.dims.obs_horizon = get<int>(j, "denoiser", "obs_horizon");
  c.dims.point_hidden = get<int>(j, "denoiser", "point_hidden");
  c.dims.feature_dim = get<int>(j, "denoiser", "feature_dim");
  c.dims.time_embed_dim = get<int>(j, "denoiser", "time_embed_dim");
  c.dims.trunk_hidden = get<std::vector<int>>(j, "denoiser", "trunk_hidden");

  c.sampler.kind = with_key("sampler.kind", [&] { return parse_sampler_kind(get<std::string>(j, "sampler", "kind")); });
  c.sampler.steps = get<int>(j, "sampler", "steps");
  if (c.sampler.steps == 0) c.sampler.steps = c.schedule.K;
  c.sampler.eta = get<double>(j, "sampler", "eta");
  c.sampler.clamp_clean = get<bool>(j, "sampler", "clamp_clean");

  c.guidance.mode = with_key("guidance.mode", [&] { return parse_guidance_mode(get<std::string>(j, "guidance", "mode")); });
  c.guidance.grad_mode = with_key("guidance.grad_mode", [&] { return parse_grad_mode(get<std::string>(j, "guidance", "grad_mode")); });
  c.guidance.rho = get<double>(j, "guidance", "rho");
  const auto units = get<std::string>(j, "guidance", "rho_units");
  if (units != "base" && units != "absolute")
    throw ConfigError("config key 'guidance.rho_units' must be base|absolute, got '" + units + "'");
  c.rho_absolute = units == "absolute";
  c.guidance.q_star = get<double>(j, "guidance", "q_star");
  c.guidance.coord_mask = get<std::vector<int>>(j, "guidance", "coord_mask");
  c.skip_last = get<bool>(j, "guidance", "skip_last");

  const json& sb = j.at("sandbox");
  c.sandbox.ee_radius = sb.at("ee_radius").get<double>();
  c.sandbox.target_radius = sb.at("target_radius").get<double>();
  c.sandbox.obstacle_radius = sb.at("obstacle_radius").get<double>();
  c.sandbox.annulus_inner = sb.at("annulus_inner").get<double>();
  c.sandbox.annulus_outer = sb.at("annulus_outer").get<double>();
  c.sandbox.start_jitter = sb.at("start_jitter").get<double>();
  c.sandbox.cloud_points = sb.at("cloud_points").get<int>();
  c.sandbox.q_star_margin = sb.at("q_star_margin").get<double>();
  c.sandbox.max_speed = sb.at("max_speed").get<double>();
  c.sandbox.accel_steps = sb.at("accel_steps").get<int>();
  c.sandbox.via_jitter = sb.at("via_jitter").get<double>();
  c.sandbox.executed_steps = sb.at("executed_steps").get<int>();
  c.sandbox.max_plans = sb.at("max_plans").get<int>();
  c.sandbox.success_fraction = sb.at("success_fraction").get<double>();
  with_key("sandbox", [&] { c.sandbox.validate(); return 0; });
  c.dims.num_points = c.sandbox.cloud_points;

  c.training.steps = get<int>(j, "training", "steps");
  c.training.batch_size = get<int>(j, "training", "batch_size");
  c.training.adam.lr = get<double>(j, "training", "lr");
  c.training.adam.beta1 = get<double>(j, "training", "beta1");
  c.training.adam.beta2 = get<double>(j, "training", "beta2");
  c.training.loss_window = get<int>(j, "training", "loss_window");
  c.log_every = get<int>(j, "training", "log_every");
  c.training.seed = derive_seed(c.seed, 12);
  if (c.training.steps < 0 || c.training.batch_size < 1 || c.training.loss_window < 1 || !(c.training.adam.lr > 0.0))
    throw ConfigError("config section 'training' has out-of-range values");

  c.demo_episodes = get<int>(j, "collect", "episodes");
  if (c.demo_episodes < 0) throw ConfigError("config key 'collect.episodes' must be >= 0");
  c.demo_task = with_key("collect.task", [&] { return parse_task_kind(get<std::string>(j, "collect", "task")); });

  c.eval.task = with_key("eval.task", [&] { return parse_task_kind(get<std::string>(j, "eval", "task")); });
  c.eval.scenes = get<int>(j, "eval", "scenes");
  if (c.eval.scenes < 0) throw ConfigError("config key 'eval.scenes' must be >= 0");
  c.eval.rollout_seeds = get<std::vector<std::uint64_t>>(j, "eval", "rollout_seeds");
  if (c.eval.rollout_seeds.empty()) throw ConfigError("config key 'eval.rollout_seeds' must not be empty");

  c.sweep_grid = get<std::vector<double>>(j, "sweep", "grid");

  with_key("denoiser", [&] { c.dims.validate(); return 0; });
  with_key("sampler", [&] { c.sampler.validate(c.schedule.build()); return 0; });
  GuidanceConfig probe = c.guidance;
  if (probe.q_star <= 0.0) probe.q_star = 1.0;
  with_key("guidance", [&] { probe.validate(c.dims.action_dim); return 0; });
  for (double g : c.sweep_grid)
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("config key 'sweep.grid' must hold finite values >= 0");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  collect_keys(default_config_json(), "", out);
  return out;
}

void apply_override(json& j, const std::string& dotted_key, const std::string& value) {
  const json defaults = default_config_json();
  const json* def = &defaults;
  json* slot = &j;
  std::stringstream ss(dotted_key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (dotted_key.empty() || dotted_key.back() == '.') throw ConfigError("unknown config key '" + dotted_key + "'");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!def->is_object() || !def->contains(parts[i])) throw ConfigError("unknown config key '" + dotted_key + "'");
    def = &(*def)[parts[i]];
    if (!slot->is_object()) *slot = json::object();
    slot = &(*slot)[parts[i]];
  }
  if (def->is_object()) throw ConfigError("config key '" + dotted_key + "' is a section, not a value");
  json parsed;
  if (def->is_string()) {
    parsed = value;
  } else {
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      throw ConfigError("config key '" + dotted_key + "' must be " + type_name(*def) + ", got '" + value + "'");
    }
  }
  if (!compatible(*def, parsed))
    throw ConfigError("config key '" + dotted_key + "' must be " + type_name(*def) + ", got '" + value + "'");
  *slot = parsed;
}

double rho_base_scale(double q_star, const MinMax& action_stats) {
  const Eigen::VectorXd h = action_stats.half_range();
  const double s = h.size() ? h.mean() : 1.0;
  if (!(s > 0.0)) return 0.0;
  return q_star / (s * s);
}

double reference_q_star(const ExperimentConfig& cfg) {
  if (cfg.guidance.q_star > 0.0) return cfg.guidance.q_star;
  return (cfg.sandbox.obstacle_radius + cfg.sandbox.ee_radius) * (1.0 + cfg.sandbox.q_star_margin);
}

CollectConfig ExperimentConfig::collect_config() const {
  CollectConfig cc;
  cc.episodes = demo_episodes;
  cc.seed = derive_seed(seed, 11);
  cc.task = demo_task;
  cc.horizon = dims.horizon;
  cc.obs_horizon = dims.obs_horizon;
  return cc;
}

std::uint64_t ExperimentConfig::init_seed() const { return derive_seed(seed, 13); }

std::vector<Scene> ExperimentConfig::eval_scenes() const { return eval_scenes(eval.task); }

std::vector<Scene> ExperimentConfig::eval_scenes(TaskKind task) const {
  std::vector<Scene> out;
  const std::uint64_t stream = derive_seed(seed, 14);
  for (int i = 0; i < eval.scenes; ++i)
    out.push_back(generate_scene(task, derive_seed(stream, static_cast<std::uint64_t>(i)), sandbox));
  return out;
}

EvalOptions ExperimentConfig::eval_options(const Policy& policy) const { return eval_options(policy, guidance.rho); }

EvalOptions ExperimentConfig::eval_options(const Policy& policy, double rho) const {
  EvalOptions o;
  o.guidance = guidance;
  o.guidance.rho = rho_absolute ? rho : rho * rho_base_scale(reference_q_star(*this), policy.stats.action);
  o.sampler = sampler;
  o.sandbox = sandbox;
  o.seeds = eval.rollout_seeds;
  o.skip_last = skip_last;
  return o;
}

}  // namespace lo3d
