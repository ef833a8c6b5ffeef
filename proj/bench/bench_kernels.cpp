#include <benchmark/benchmark.h>

#include <vector>

#include "lo3d/config.hpp"
#include "lo3d/kernels.hpp"
#include "lo3d/rng.hpp"

using namespace lo3d;

namespace {

std::vector<Eigen::MatrixXd> make_clouds(int clouds, int points) {
  Rng rng(5);
  std::vector<Eigen::MatrixXd> out;
  for (int c = 0; c < clouds; ++c) out.push_back(rng.normal_matrix(points, 2));
  return out;
}

void BM_NearestSerial(benchmark::State& st) {
  const auto clouds = make_clouds(4, static_cast<int>(st.range(0)) / 4);
  const Eigen::VectorXd q = Eigen::Vector2d(0.3, -0.2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::nearest_point_serial(clouds, q));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_NearestParallel(benchmark::State& st) {
  const auto clouds = make_clouds(4, static_cast<int>(st.range(0)) / 4);
  const Eigen::VectorXd q = Eigen::Vector2d(0.3, -0.2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::nearest_point_parallel(clouds, q));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_SegmentSerial(benchmark::State& st) {
  const auto clouds = make_clouds(4, static_cast<int>(st.range(0)) / 4);
  const Eigen::VectorXd a = Eigen::Vector2d(-0.5, 0.1), b = Eigen::Vector2d(0.4, 0.2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::segment_cloud_distance_serial(clouds, a, b));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_SegmentParallel(benchmark::State& st) {
  const auto clouds = make_clouds(4, static_cast<int>(st.range(0)) / 4);
  const Eigen::VectorXd a = Eigen::Vector2d(-0.5, 0.1), b = Eigen::Vector2d(0.4, 0.2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::segment_cloud_distance_parallel(clouds, a, b));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

struct EvalFixture {
  Policy policy;
  std::vector<Scene> scenes;
  EvalOptions opts;

  EvalFixture() {
    ExperimentConfig cfg = parse_config(nlohmann::json::object());
    cfg.demo_episodes = 4;
    cfg.eval.scenes = 8;
    cfg.sandbox.max_plans = 2;
    const DemoDataset demos = collect_demos(cfg.collect_config(), cfg.sandbox);
    Rng rng(9);
    policy.params = init_denoiser(cfg.dims, cfg.prediction, cfg.encoder, cfg.init_seed());
    policy.params.for_each_layer([&](Linear& l) { l.W = 0.05 * rng.normal_matrix(l.W.rows(), l.W.cols()); });
    policy.stats = demos.stats;
    policy.schedule = cfg.schedule.build();
    scenes = cfg.eval_scenes(TaskKind::reach_around);
    opts = cfg.eval_options(policy, 1.0);
    opts.guidance.mode = GuidanceMode::clean_estimate;
    opts.sampler.kind = SamplerKind::ddim;
    opts.sampler.steps = 16;
  }
};

const EvalFixture& eval_fixture() {
  static const EvalFixture f;
  return f;
}

void BM_EvaluateSerial(benchmark::State& st) {
  const auto& f = eval_fixture();
  for (auto _ : st) benchmark::DoNotOptimize(evaluate_serial(f.policy, f.scenes, f.opts));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(f.scenes.size()));
}

void BM_EvaluateParallel(benchmark::State& st) {
  const auto& f = eval_fixture();
  for (auto _ : st) benchmark::DoNotOptimize(evaluate(f.policy, f.scenes, f.opts));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(f.scenes.size()));
}

}  // namespace

BENCHMARK(BM_NearestSerial)->RangeMultiplier(16)->Range(256, 1 << 20);
BENCHMARK(BM_NearestParallel)->RangeMultiplier(16)->Range(256, 1 << 20)->UseRealTime();
BENCHMARK(BM_SegmentSerial)->RangeMultiplier(16)->Range(256, 1 << 20);
BENCHMARK(BM_SegmentParallel)->RangeMultiplier(16)->Range(256, 1 << 20)->UseRealTime();
BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
