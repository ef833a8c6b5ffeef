#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "lo3d/checkpoint.hpp"
#include "lo3d/config.hpp"
#include "lo3d/dataset.hpp"
#include "lo3d/errors.hpp"
#include "lo3d/metrics_csv.hpp"
#include "lo3d/sandbox.hpp"
#include "lo3d/scene_io.hpp"
#include "lo3d/svg.hpp"
#include "lo3d/task_spec.hpp"
#include "lo3d/training.hpp"

namespace fs = std::filesystem;
using namespace lo3d;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << text;
}

std::vector<Scene> scenes_for(const ExperimentConfig& cfg, const std::string& scene_file) {
  return scene_file.empty() ? cfg.eval_scenes() : read_scenes(scene_file);
}

Policy load_policy(const std::string& path) {
  if (path.empty()) throw ConfigError("--policy is required");
  return read_checkpoint(fs::path(path)).policy();
}

}  // namespace

int main(int argc, char** argv) {
  lo3d::retain_heap_memory();
  CLI::App app{"Cost-guided trajectory diffusion in a planar sandbox"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  std::map<std::string, std::string> overrides;
  std::vector<std::string> keys = config_keys();
  for (const auto& key : keys) app.add_option("--" + key, overrides[key], "config key " + key);

  std::string out, data_path, policy_path, scene_file, policies_dir = ".", spec_text, svg_path, loss_csv;
  bool timing = false;
  int scene_index = 0;

  auto* gen = app.add_subcommand("gen-scenes", "write the evaluation scenes as a scene spec file");
  gen->add_option("--out", out, "output file (default stdout)");

  auto* collect = app.add_subcommand("collect", "record scripted demonstrations");
  collect->add_option("--out", out, "dataset file")->required();

  auto* train_cmd = app.add_subcommand("train", "train a denoiser on a demonstration dataset");
  train_cmd->add_option("--data", data_path, "dataset file")->required();
  train_cmd->add_option("--out", out, "checkpoint file")->required();
  train_cmd->add_option("--loss-csv", loss_csv, "write step,loss,running_loss rows here");

  auto* eval = app.add_subcommand("eval", "closed-loop evaluation over the configured scenes and seeds");
  eval->add_option("--policy", policy_path, "checkpoint file")->required();
  eval->add_option("--scenes", scene_file, "scene spec file (default: generated from the config)");
  eval->add_option("--out", out, "per-episode CSV (default stdout)");
  eval->add_flag("--timing", timing, "add wall-clock columns");

  auto* sweep = app.add_subcommand("sweep-rho", "evaluate every rho of sweep.grid");
  sweep->add_option("--policy", policy_path, "checkpoint file")->required();
  sweep->add_option("--scenes", scene_file, "scene spec file (default: generated from the config)");
  sweep->add_option("--out", out, "frontier CSV (default stdout)");

  auto* plot = app.add_subcommand("plot", "render one episode as SVG");
  plot->add_option("--policy", policy_path, "checkpoint file")->required();
  plot->add_option("--scenes", scene_file, "scene spec file (default: generated from the config)");
  plot->add_option("--scene-index", scene_index, "which scene to roll out");
  plot->add_option("--out", out, "SVG file (default stdout)");

  auto* run = app.add_subcommand("run", "execute a task specification on one scene");
  run->add_option("spec", spec_text, "e.g. \"use reach on red_disc avoid kettle\"")->required();
  run->add_option("--policies", policies_dir, "directory holding <policy>.ckpt files");
  run->add_option("--scenes", scene_file, "scene spec file (default: generated from the config)");
  run->add_option("--scene-index", scene_index, "which scene to use");
  run->add_option("--svg", svg_path, "also render the episode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  int diverged = 0;
  auto count_diverged = [&](const EvalTable& t) {
    for (const auto& r : t.rows) diverged += r.result.diverged ? 1 : 0;
  };
  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) j = to_json(load_config(config_path));
    for (const auto& key : keys)
      if (app.count("--" + key)) apply_override(j, key, overrides[key]);
    const ExperimentConfig cfg = parse_config(j);

    if (*gen) {
      write_text(out, format_scenes(cfg.eval_scenes()));
    } else if (*collect) {
      const DemoDataset data = collect_demos(cfg.collect_config(), cfg.sandbox);
      write_dataset(data, fs::path(out));
      std::size_t steps = 0;
      for (const auto& e : data.episodes) steps += e.steps;
      std::cout << "episodes=" << data.episodes.size() << " steps=" << steps << '\n';
    } else if (*train_cmd) {
      const DemoDataset data = read_dataset(fs::path(data_path));
      if (static_cast<int>(data.num_points) != cfg.dims.num_points)
        throw ConfigError("dataset clouds have " + std::to_string(data.num_points) +
                          " points but sandbox.cloud_points is " + std::to_string(cfg.dims.num_points));
      const auto examples = training_examples(data, cfg.dims.horizon, cfg.dims.obs_horizon);
      if (examples.empty()) throw DataError("dataset holds no training examples");
      Checkpoint ck;
      ck.schedule = cfg.schedule;
      ck.stats = data.stats;
      ck.params = init_denoiser(cfg.dims, cfg.prediction, cfg.encoder, cfg.init_seed());
      const NoiseSchedule schedule = cfg.schedule.build();
      const TrainReport rep = lo3d::train(
          ck.params, schedule, examples, cfg.training,
          [](int step, double running) { std::cerr << "step " << step << " loss " << format_double(running) << '\n'; },
          cfg.log_every);
      write_checkpoint(ck, fs::path(out));
      if (!loss_csv.empty()) {
        std::string text = "step,loss,running_loss\n";
        for (std::size_t i = 0; i < rep.losses.size(); ++i)
          text += std::to_string(i + 1) + "," + format_double(rep.losses[i]) + "," + format_double(rep.running[i]) + "\n";
        write_text(loss_csv, text);
      }
      std::cout << "steps=" << rep.steps_run << " final_loss=" << format_double(rep.final_running())
                << " parameters=" << ck.params.parameter_count() << '\n';
    } else if (*eval) {
      const Policy policy = load_policy(policy_path);
      const auto scenes = scenes_for(cfg, scene_file);
      const EvalTable table = evaluate(policy, scenes, cfg.eval_options(policy));
      count_diverged(table);
      write_text(out, eval_csv(table, timing));
      std::cout << summary_line(table.summary, timing) << '\n';
    } else if (*sweep) {
      const Policy policy = load_policy(policy_path);
      const auto scenes = scenes_for(cfg, scene_file);
      std::vector<SweepPoint> points;
      for (double rho : cfg.sweep_grid) {
        EvalOptions opts = cfg.eval_options(policy, rho);
        if (rho == 0.0) opts.guidance.mode = GuidanceMode::none;
        const EvalTable table = evaluate(policy, scenes, opts);
        count_diverged(table);
        SweepPoint p{rho, opts.guidance.rho, table.summary};
        std::cerr << "rho=" << format_double(rho) << ' ' << summary_line(p.summary) << '\n';
        points.push_back(p);
      }
      write_text(out, sweep_csv(points));
    } else if (*plot || *run) {
      std::string policy_file = policy_path;
      std::vector<Scene> scenes = scenes_for(cfg, scene_file);
      if (scene_index < 0 || scene_index >= static_cast<int>(scenes.size()))
        throw ConfigError("--scene-index " + std::to_string(scene_index) + " is out of range");
      Scene scene = scenes[static_cast<std::size_t>(scene_index)];
      if (*run) {
        const TaskSpec spec = parse_task_spec(spec_text);
        policy_file = (fs::path(policies_dir) / (spec.policy_name + ".ckpt")).string();
        if (!fs::exists(policy_file)) throw ConfigError("no checkpoint for policy '" + spec.policy_name + "' at " + policy_file);
        scene.target_labels = spec.target_labels;
        scene.obstacle_labels = spec.obstacle_labels;
        scene.validate();
        for (const auto& l : spec.target_labels)
          if (!scene.find(l)) throw DataError("object absent: no object labelled '" + l + "' in the scene");
      }
      const Policy policy = load_policy(policy_file);
      EvalOptions opts = cfg.eval_options(policy);
      EpisodeTrace trace;
      const EpisodeResult res = rollout(policy, scene, opts.guidance, opts.sampler, opts.sandbox,
                                        derive_seed(scene.seed, opts.seeds.front()), &trace, opts.skip_last);
      const std::string svg = render_episode_svg(scene, trace, &res);
      if (*plot) write_text(out, svg);
      if (*run && !svg_path.empty()) write_text(svg_path, svg);
      EvalTable table;
      table.rows.push_back({static_cast<std::size_t>(scene_index), scene.seed, derive_seed(scene.seed, opts.seeds.front()), res});
      table.summary = summarize(table.rows);
      count_diverged(table);
      if (*run) std::cout << eval_csv(table);
      std::cerr << summary_line(table.summary) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const TrainingError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 4;
  } catch (const SamplerDivergence& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 4;
  }
  if (diverged > 0) {
    std::cerr << "divergence: " << diverged << " episode(s) hit a non-finite sample\n";
    return 4;
  }
  return 0;
}
