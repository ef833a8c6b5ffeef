#include "doctest.h"

#include <cstdlib>
#include <set>

#include "lo3d/config.hpp"
#include "lo3d/errors.hpp"
#include "lo3d/metrics_csv.hpp"
#include "lo3d/svg.hpp"
#include "lo3d/task_spec.hpp"

using namespace lo3d;
using nlohmann::json;

namespace {

std::vector<std::string> single_char_mutations(const std::string& key) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz_0123456789.";
  std::set<std::string> out;
  for (std::size_t i = 0; i < key.size(); ++i) {
    std::string del = key;
    del.erase(i, 1);
    out.insert(del);
    for (char c : alphabet) {
      std::string sub = key;
      sub[i] = c;
      out.insert(sub);
    }
    if (i + 1 < key.size()) {
      std::string swp = key;
      std::swap(swp[i], swp[i + 1]);
      out.insert(swp);
    }
  }
  for (std::size_t i = 0; i <= key.size(); ++i)
    for (char c : alphabet) {
      std::string ins = key;
      ins.insert(i, 1, c);
      out.insert(ins);
    }
  out.erase(key);
  return {out.begin(), out.end()};
}

// Builds {"a": {"b": value}} from "a.b".
json nested(const std::string& dotted, const json& value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1)
    parts.push_back(dotted.substr(start, dot - start));
  parts.push_back(dotted.substr(start));
  json j = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->empty()) return json();  // not representable as an object path
    json wrap = json::object();
    wrap[*it] = j;
    j = wrap;
  }
  return j;
}

json value_at(const json& root, const std::string& dotted) {
  const json* j = &root;
  std::size_t start = 0;
  for (std::size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1)
    j = &(*j)[dotted.substr(start, dot - start)];
  return (*j)[dotted.substr(start)];
}

int count_of(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t p = text.find(needle); p != std::string::npos; p = text.find(needle, p + needle.size())) ++n;
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("every key round trips and every single-character misspelling is rejected") {
    const json defaults = default_config_json();
    const auto keys = config_keys();
    REQUIRE(keys.size() > 30);
    const std::set<std::string> valid(keys.begin(), keys.end());
    std::size_t rejected = 0;
    for (const auto& key : keys) {
      const json good = nested(key, value_at(defaults, key));
      CHECK_NOTHROW(parse_config(good));
      for (const auto& bad : single_char_mutations(key)) {
        if (valid.count(bad)) continue;
        json file = nested(bad, value_at(defaults, key));
        if (file.is_null()) {
          file = json::object();
          file[bad] = value_at(defaults, key);
        }
        bool threw = false;
        try {
          parse_config(file);
        } catch (const ConfigError&) {
          threw = true;
        }
        CHECK_MESSAGE(threw, "config accepted misspelled key '", bad, "'");
        json flags = json::object();
        CHECK_THROWS_AS(apply_override(flags, bad, "1"), ConfigError);
        ++rejected;
      }
    }
    CHECK(rejected > 10000);
  }

  TEST_CASE("overrides are typed by the schema") {
    json j = json::object();
    apply_override(j, "guidance.rho", "2.5");
    apply_override(j, "sampler.kind", "ddim");
    apply_override(j, "sampler.steps", "16");
    apply_override(j, "denoiser.trunk_hidden", "[32,16]");
    apply_override(j, "guidance.skip_last", "true");
    const ExperimentConfig cfg = parse_config(j);
    CHECK(cfg.guidance.rho == 2.5);
    CHECK(cfg.sampler.kind == SamplerKind::ddim);
    CHECK(cfg.sampler.steps == 16);
    CHECK(cfg.dims.trunk_hidden == std::vector<int>{32, 16});
    CHECK(cfg.skip_last);

    json bad = json::object();
    CHECK_THROWS_AS(apply_override(bad, "guidance.rho", "fast"), ConfigError);
    CHECK_THROWS_AS(apply_override(bad, "sampler.steps", "\"16\""), ConfigError);
    CHECK_THROWS_AS(apply_override(bad, "guidance", "1"), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"guidance", {{"mode", "sideways"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"sampler", {{"eta", 2.0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"guidance", {{"rho", -1.0}}}}), ConfigError);
  }

  TEST_CASE("config json round trip") {
    json j = json::object();
    apply_override(j, "seed", "7");
    apply_override(j, "eval.task", "reach");
    apply_override(j, "guidance.mode", "noisy_baseline");
    const ExperimentConfig a = parse_config(j);
    const ExperimentConfig b = parse_config(to_json(a));
    CHECK(to_json(a) == to_json(b));
    CHECK(b.seed == 7);
    CHECK(b.eval.task == TaskKind::reach);
  }

  TEST_CASE("task specification grammar") {
    const TaskSpec s = parse_task_spec("use reach on red_disc avoid kettle");
    CHECK(s.policy_name == "reach");
    CHECK(s.target_labels == std::vector<std::string>{"red_disc"});
    CHECK(s.obstacle_labels == std::vector<std::string>{"kettle"});

    const TaskSpec multi = parse_task_spec("use reach on a,b");
    CHECK(multi.target_labels == std::vector<std::string>{"a", "b"});
    CHECK(multi.obstacle_labels.empty());
    CHECK(parse_task_spec("USE Reach ON a , b AVOID c,d") ==
          TaskSpec{"reach", {"a", "b"}, {"c", "d"}});
    CHECK(parse_task_spec(format_task_spec(s)) == s);

    try {
      parse_task_spec("reach red_disc");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.token() == "reach");
    }
    try {
      parse_task_spec("use reach on red_disc avoid");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.token() == "<end>");
    }
    try {
      parse_task_spec("use reach on a,,b");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.token() == ",");
    }
    try {
      parse_task_spec("use reach on a avoid b extra");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.token() == "extra");
    }
    CHECK_THROWS_AS(parse_task_spec(""), ParseError);
    CHECK_THROWS_AS(parse_task_spec("use reach on a$b"), ParseError);

    bool overlap_is_parse_error = false;
    try {
      parse_task_spec("use reach on a,b avoid b");
    } catch (const ParseError&) {
      overlap_is_parse_error = true;
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
    CHECK_FALSE(overlap_is_parse_error);
  }

  TEST_CASE("svg element counts follow the scene") {
    for (TaskKind task : {TaskKind::reach, TaskKind::reach_around, TaskKind::reach_with_distractors}) {
      const Scene scene = generate_scene(task, 11);
      const std::string frame_only = render_episode_svg(scene, {});
      CHECK(count_of(frame_only, "class=\"frame\"") == 1);
      CHECK(count_of(frame_only, "class=\"object\"") == static_cast<int>(scene.objects.size()));
      CHECK(count_of(frame_only, "class=\"qstar\"") == static_cast<int>(scene.obstacle_labels.size()));
      CHECK(count_of(frame_only, "class=\"path\"") == 0);
      CHECK(count_of(frame_only, "class=\"plan\"") == 0);
      CHECK(count_of(frame_only, "<svg ") == 1);
      CHECK(frame_only.find("</svg>") != std::string::npos);

      EpisodeTrace trace;
      trace.executed = {scene.start, scene.start + Eigen::Vector2d(0.1, 0.0), scene.target_position()};
      trace.plans.push_back(Trajectory::Zero(4, 2));
      trace.plans.push_back(Trajectory::Ones(4, 2) * 0.1);
      const std::string full = render_episode_svg(scene, trace);
      CHECK(count_of(full, "class=\"object\"") == static_cast<int>(scene.objects.size()));
      CHECK(count_of(full, "class=\"path\"") == 1);
      CHECK(count_of(full, "class=\"plan\"") == 2);
      CHECK(count_of(full, "class=\"waypoint\"") == 8);
      CHECK(render_episode_svg(scene, trace) == full);
    }
  }

  TEST_CASE("csv formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5e-7) == "-2.5e-07");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_double(std::nan("")) == "nan");
    for (double v : {1.0 / 3.0, 12345.678901234567, 6.02214076e23, 5e-324})
      CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);

    CHECK(eval_csv_header() ==
          "scene_index,scene_seed,rollout_seed,success,collided,diverged,min_clearance,path_length,smoothness,"
          "plans_issued,final_distance,guidance_evaluations,fallbacks");
    CHECK(eval_csv_header(true) == eval_csv_header() + ",wall_ms_per_plan");

    EvalRow row;
    row.scene_index = 3;
    row.scene_seed = 99;
    row.rollout_seed = 7;
    row.result.success = true;
    row.result.min_clearance = 0.25;
    row.result.path_length = 1.5;
    row.result.plans_issued = 4;
    const std::string line = eval_csv_row(row);
    CHECK(line.rfind("3,99,7,1,0,0,0.25,1.5,", 0) == 0);
    CHECK(std::count(line.begin(), line.end(), ',') == 12);

    EvalTable table;
    table.rows = {row, row};
    table.summary = summarize(table.rows);
    const std::string csv = eval_csv(table);
    CHECK(count_of(csv, "\n") == 3);
    CHECK(summary_line(table.summary).find("success_rate=1") != std::string::npos);

    const std::string sweep = sweep_csv({SweepPoint{0.0, 0.0, table.summary}, SweepPoint{2.0, 0.4, table.summary}});
    CHECK(sweep.rfind("rho,rho_abs,episodes,success_rate,collision_rate,mean_min_clearance,mean_smoothness,"
                      "mean_path_length\n",
                      0) == 0);
    CHECK(count_of(sweep, "\n") == 3);
    CHECK(sweep.find("\n2,0.4,2,1,0,") != std::string::npos);
  }
}
