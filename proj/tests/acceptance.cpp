// Acceptance run: trains the default policies from scratch, then checks each
// criterion and prints one PASS/FAIL line per criterion. Exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lo3d/checkpoint.hpp"
#include "lo3d/config.hpp"
#include "lo3d/metrics_csv.hpp"
#include "lo3d/obstacle_cost.hpp"
#include "lo3d/sampler.hpp"
#include "lo3d/training.hpp"
#include "test_util.hpp"

using namespace lo3d;
using Eigen::MatrixXd;

namespace {

// Tolerances and thresholds.
constexpr double kIdentityTol = 1e-10;
constexpr double kLinearityTol = 1e-12;
constexpr double kSuite1Seconds = 1.0;
constexpr double kNetGradTol = 1e-4;
constexpr double kCostGradTol = 1e-6;
constexpr double kKinkMargin = 1e-3;
constexpr double kSuite2Seconds = 30.0;
constexpr int kOracleDraws = 10000;
constexpr double kMeanStandardErrors = 3.0;
constexpr double kStdRelTol = 0.10;
constexpr double kSuite3Seconds = 60.0;
constexpr int kDemoEpisodes = 200;
constexpr double kLossThreshold = 0.05;
constexpr int kMaxTrainSteps = 10000;
constexpr int kEvalScenes = 50;
constexpr double kReachSuccess = 0.90;
constexpr double kUnguidedCollisionMin = 0.80;
constexpr double kGuidedCollisionMax = 0.20;
constexpr double kGuidedSuccessMin = 0.70;
constexpr double kTunedRho = 5.0;        // multiple of the base scale
constexpr double kAblationRho = 1.0;     // equal rho for both skip_last runs
constexpr double kAblationNoisyBand = 0.05;
constexpr double kAblationCleanDrop = 0.30;
constexpr int kDdimSteps = 16;
constexpr double kDdimEta = 1.0;
constexpr double kRankCorrelationMin = 0.8;
constexpr double kDistractorBand = 0.05;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  criterion %2d  %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

void criterion_schedule() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_identity = 0.0, worst_linear = 0.0;
  bool monotone = true;
  const std::vector<NoiseSchedule> schedules = {make_schedule(10), make_schedule(100),
                                                 make_schedule(1000, ScheduleKind::linear, 1e-4, 0.02)};
  for (const NoiseSchedule& s : schedules) {
    const int K = s.K;
    for (int k = 1; k <= K; ++k) monotone = monotone && s.alpha_bar_at(k) < s.alpha_bar_at(k - 1);
    for (int k : {1, K / 2, K}) {
      const MatrixXd A0 = rng.normal_matrix(16, 2), eps = rng.normal_matrix(16, 2);
      const MatrixXd back = estimate_clean(s, forward_diffuse(s, A0, k, eps), eps, k, false);
      worst_identity = std::max(worst_identity, (back - A0).cwiseAbs().maxCoeff());

      const MatrixXd X = rng.normal_matrix(16, 2), Y = rng.normal_matrix(16, 2);
      const MatrixXd E = rng.normal_matrix(16, 2), F = rng.normal_matrix(16, 2);
      const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
      const MatrixXd lhs = posterior_mean(s, a * X + b * Y, a * E + b * F, k);
      const MatrixXd rhs = a * posterior_mean(s, X, E, k) + b * posterior_mean(s, Y, F, k);
      worst_linear = std::max(worst_linear, test::rel_error(lhs, rhs));
    }
  }
  const double secs = seconds_since(t0);
  report(1, "schedule algebra",
         worst_identity <= kIdentityTol && worst_linear <= kLinearityTol && monotone && secs < kSuite1Seconds,
         "identity " + fmt("%.1e", worst_identity) + ", linearity " + fmt("%.1e", worst_linear) + ", monotone " +
             (monotone ? "yes" : "no") + ", " + fmt("%.2f s", secs));
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  const DenoiserDims dims = test::tiny_dims();
  const NoiseSchedule schedule = make_schedule(10);
  Rng rng(202);
  std::vector<Observation> obs;
  std::vector<Trajectory> traj;
  for (int b = 0; b < 2; ++b) {
    obs.push_back(test::random_observation(dims, rng));
    traj.push_back(rng.normal_matrix(dims.horizon, dims.action_dim));
  }
  const std::vector<int> steps{2, 8};
  const double h = 1e-4;
  double worst_param = 0.0, worst_vjp = 0.0;
  for (auto pred : {PredictionType::epsilon, PredictionType::sample})
    for (auto enc : {EncoderMode::mlp, EncoderMode::mlp_residual}) {
      auto p = test::randomized(init_denoiser(dims, pred, enc, 3), 17);
      const DenoiserBatch batch = make_batch(p, obs, traj, steps);
      const MatrixXd weights = rng.normal_matrix(dims.traj_size(), 2);
      ForwardCache cache;
      forward(p, batch, &cache);
      DenoiserParams grads = p.zeros_like();
      MatrixXd d_traj;
      backward(p, batch, cache, weights, &grads, &d_traj);
      auto objective = [&] { return forward(p, batch).cwiseProduct(weights).sum(); };

      std::vector<Linear*> layers, glayers;
      p.for_each_layer([&](Linear& l) { layers.push_back(&l); });
      grads.for_each_layer([&](Linear& l) { glayers.push_back(&l); });
      for (std::size_t li = 0; li < layers.size(); ++li) {
        auto fW = [&](const MatrixXd& W) {
          const MatrixXd keep = layers[li]->W;
          layers[li]->W = W;
          const double v = objective();
          layers[li]->W = keep;
          return v;
        };
        auto fb = [&](const MatrixXd& b) {
          const Eigen::VectorXd keep = layers[li]->b;
          layers[li]->b = b;
          const double v = objective();
          layers[li]->b = keep;
          return v;
        };
        worst_param = std::max(worst_param, test::rel_error(test::numeric_gradient(fW, layers[li]->W, h), glayers[li]->W));
        worst_param = std::max(worst_param, test::rel_error(test::numeric_gradient(fb, layers[li]->b, h), glayers[li]->b));
      }

      for (int k : {1, 5, 10}) {
        const Trajectory cot = rng.normal_matrix(dims.horizon, dims.action_dim);
        auto f = [&](const MatrixXd& a) { return predict_noise(p, schedule, a, k, obs[0]).cwiseProduct(cot).sum(); };
        const MatrixXd fd = test::numeric_gradient(f, traj[0], h);
        worst_vjp = std::max(worst_vjp, test::rel_error(fd, denoiser_vjp(p, schedule, traj[0], k, obs[0], cot)));
      }
    }

  double worst_cost = 0.0;
  const std::vector<int> mask{0, 1};
  for (int trial = 0; trial < 50; ++trial) {
    const Trajectory A = rng.normal_matrix(16, 2) * 0.2;
    const Eigen::VectorXd c = rng.normal_matrix(2, 1) * 0.1;
    const double q = 0.25;
    bool near_kink = false;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double d = (A.row(i).transpose() - c).norm();
      near_kink = near_kink || std::abs(d - q) < kKinkMargin || d < kKinkMargin;
    }
    if (near_kink) continue;
    auto f = [&](const MatrixXd& a) { return trajectory_cost(a, c, q, mask); };
    const MatrixXd fd = test::numeric_gradient(f, A, 1e-7);
    worst_cost = std::max(worst_cost, (fd - cost_gradient(A, c, q, mask).gradient).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  report(2, "gradient checks",
         worst_param <= kNetGradTol && worst_vjp <= kNetGradTol && worst_cost <= kCostGradTol && secs < kSuite2Seconds,
         "params " + fmt("%.1e", worst_param) + ", vjp " + fmt("%.1e", worst_vjp) + ", cost " +
             fmt("%.1e", worst_cost) + ", " + fmt("%.2f s", secs));
}

void criterion_oracle() {
  const auto t0 = Clock::now();
  const NoiseSchedule s = make_schedule(100);
  Rng setup(303);
  const int H = 4, D = 2;
  const Trajectory mean = (setup.normal_matrix(H, D) * 0.3).cwiseMax(-0.5).cwiseMin(0.5);
  Trajectory sd(H, D);
  for (Eigen::Index i = 0; i < sd.size(); ++i) sd.data()[i] = setup.uniform(0.4, 1.0);
  const AnalyticGaussianDenoiser oracle(s, mean, sd);
  SamplerConfig cfg;
  cfg.steps = s.K;

  MatrixXd sum = MatrixXd::Zero(H, D), sum_sq = MatrixXd::Zero(H, D);
  Rng rng(304);
  for (int n = 0; n < kOracleDraws; ++n) {
    const Trajectory a = guided_sample(s, oracle, nullptr, cfg, H, D, rng);
    sum += a;
    sum_sq += a.cwiseProduct(a);
  }
  const double n = kOracleDraws;
  const MatrixXd m = sum / n;
  const MatrixXd var = (sum_sq / n - m.cwiseProduct(m)) * (n / (n - 1.0));
  double worst_z = 0.0, worst_std = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    worst_z = std::max(worst_z, std::abs(m.data()[i] - mean.data()[i]) / (sd.data()[i] / std::sqrt(n)));
    worst_std = std::max(worst_std, std::abs(std::sqrt(var.data()[i]) - sd.data()[i]) / sd.data()[i]);
  }
  const double secs = seconds_since(t0);
  report(3, "analytic oracle ddpm", worst_z <= kMeanStandardErrors && worst_std <= kStdRelTol && secs < kSuite3Seconds,
         "max |z| " + fmt("%.2f", worst_z) + ", max std err " + fmt("%.1f%%", 100 * worst_std) + ", " +
             fmt("%.1f s", secs));
}

struct Trained {
  Checkpoint ckpt;
  TrainReport report;
};

Trained train_policy(const ExperimentConfig& cfg, const DemoDataset& data, PredictionType prediction,
                     bool full_run) {
  const auto examples = training_examples(data, cfg.dims.horizon, cfg.dims.obs_horizon);
  Trained t;
  t.ckpt.schedule = cfg.schedule;
  t.ckpt.stats = data.stats;
  t.ckpt.params = init_denoiser(cfg.dims, prediction, cfg.encoder, cfg.init_seed());
  TrainConfig tc = cfg.training;
  tc.steps = kMaxTrainSteps;
  tc.stop_below = kLossThreshold;
  tc.min_steps = full_run ? kMaxTrainSteps : 0;
  t.report = train(t.ckpt.params, cfg.schedule.build(), examples, tc);
  return t;
}

EvalSummary run_eval(const Policy& policy, const std::vector<Scene>& scenes, EvalOptions opts) {
  return evaluate(policy, scenes, opts).summary;
}

std::string rates(const EvalSummary& s) {
  return "success " + fmt("%.2f", s.success_rate) + " collisions " + fmt("%.2f", s.collision_rate);
}

}  // namespace

int main() {
  retain_heap_memory();
  const auto start = Clock::now();

  criterion_schedule();
  criterion_gradients();
  criterion_oracle();

  ExperimentConfig cfg = parse_config(nlohmann::json::object());
  cfg.demo_episodes = kDemoEpisodes;
  cfg.demo_task = TaskKind::reach;
  cfg.eval.scenes = kEvalScenes;

  const auto t_train = Clock::now();
  const DemoDataset demos = collect_demos(cfg.collect_config(), cfg.sandbox);
  const Trained eps = train_policy(cfg, demos, PredictionType::epsilon, true);
  const Trained smp = train_policy(cfg, demos, PredictionType::sample, false);
  const bool eps_ok = eps.report.first_below > 0 && eps.report.first_below <= kMaxTrainSteps;
  const bool smp_ok = smp.report.first_below > 0 && smp.report.first_below <= kMaxTrainSteps;
  report(4, "training sanity", demos.episodes.size() == kDemoEpisodes && eps_ok && smp_ok,
         "epsilon below " + fmt("%.2f", kLossThreshold) + " at step " + std::to_string(eps.report.first_below) +
             " (final " + fmt("%.4f", eps.report.final_running()) + "), sample at step " +
             std::to_string(smp.report.first_below) + ", " + fmt("%.0f s", seconds_since(t_train)));

  const Policy policy = eps.ckpt.policy();
  const auto reach = cfg.eval_scenes(TaskKind::reach);
  const auto around = cfg.eval_scenes(TaskKind::reach_around);
  const auto distract = cfg.eval_scenes(TaskKind::reach_with_distractors);

  EvalOptions none = cfg.eval_options(policy, 0.0);
  none.guidance.mode = GuidanceMode::none;
  const EvalSummary reach_none = run_eval(policy, reach, none);
  report(5, "reach success", reach_none.success_rate >= kReachSuccess, rates(reach_none));

  const EvalSummary around_none = run_eval(policy, around, none);
  EvalOptions guided = cfg.eval_options(policy, kTunedRho);
  guided.guidance.mode = GuidanceMode::clean_estimate;
  const EvalSummary around_guided = run_eval(policy, around, guided);
  report(6, "avoidance with guidance",
         around_none.collision_rate >= kUnguidedCollisionMin && around_guided.collision_rate <= kGuidedCollisionMax &&
             around_guided.success_rate >= kGuidedSuccessMin,
         "none: " + rates(around_none) + "; rho " + fmt("%g", kTunedRho) + ": " + rates(around_guided));

  EvalOptions noisy_skip = cfg.eval_options(policy, kAblationRho);
  noisy_skip.guidance.mode = GuidanceMode::noisy_baseline;
  noisy_skip.skip_last = true;
  EvalOptions clean_skip = noisy_skip;
  clean_skip.guidance.mode = GuidanceMode::clean_estimate;
  const EvalSummary ns = run_eval(policy, around, noisy_skip);
  const EvalSummary cs = run_eval(policy, around, clean_skip);
  report(7, "last-step ablation",
         std::abs(ns.collision_rate - around_none.collision_rate) <= kAblationNoisyBand + 1e-12 &&
             around_none.collision_rate - cs.collision_rate >= kAblationCleanDrop - 1e-12,
         "rho " + fmt("%g", kAblationRho) + " skip_last: noisy collisions " + fmt("%.2f", ns.collision_rate) +
             ", clean collisions " + fmt("%.2f", cs.collision_rate) + ", none " +
             fmt("%.2f", around_none.collision_rate));

  // Fewer denoising steps mean fewer guidance pushes; rho scales by K / steps.
  const double ddim_rho = kTunedRho * policy.schedule.K / kDdimSteps;
  EvalOptions ddim_none = none;
  ddim_none.sampler.kind = SamplerKind::ddim;
  ddim_none.sampler.steps = kDdimSteps;
  ddim_none.sampler.eta = kDdimEta;
  EvalOptions ddim_guided = cfg.eval_options(policy, ddim_rho);
  ddim_guided.guidance.mode = GuidanceMode::clean_estimate;
  ddim_guided.sampler = ddim_none.sampler;
  const EvalSummary dn = run_eval(policy, around, ddim_none);
  const EvalSummary dg = run_eval(policy, around, ddim_guided);
  report(8, "ddim 16-step avoidance",
         dn.collision_rate >= kUnguidedCollisionMin && dg.collision_rate <= kGuidedCollisionMax &&
             dg.success_rate >= kGuidedSuccessMin,
         "none: " + rates(dn) + "; rho " + fmt("%.2f", ddim_rho) + ": " + rates(dg));

  std::vector<double> grid, clearance, roughness;
  for (double rho : cfg.sweep_grid) {
    EvalOptions o = cfg.eval_options(policy, rho);
    o.guidance.mode = rho == 0.0 ? GuidanceMode::none : GuidanceMode::clean_estimate;
    const EvalSummary s = run_eval(policy, around, o);
    grid.push_back(rho);
    clearance.push_back(s.mean_min_clearance);
    roughness.push_back(s.mean_smoothness);
  }
  const double r_clear = spearman(grid, clearance);
  // Smoothness is a roughness sum, so smoother paths have lower values.
  const double r_rough = spearman(clearance, roughness);
  std::string curve;
  for (std::size_t i = 0; i < grid.size(); ++i)
    curve += (i ? " " : "") + fmt("%g", grid[i]) + ":" + fmt("%.3f", clearance[i]) + "/" + fmt("%.2f", roughness[i]);
  report(9, "rho frontier", r_clear >= kRankCorrelationMin && r_rough >= kRankCorrelationMin,
         "rank corr rho~clearance " + fmt("%.2f", r_clear) + ", clearance~roughness " + fmt("%.2f", r_rough) +
             " [" + curve + "]");

  bool identical_obs = true;
  for (std::size_t i = 0; i < reach.size(); ++i) {
    const std::vector<Eigen::Vector2d> hist(static_cast<std::size_t>(cfg.dims.obs_horizon), reach[i].start);
    identical_obs = identical_obs && observe(reach[i], reach[i].target_labels, hist) ==
                                         observe(distract[i], distract[i].target_labels, hist);
  }
  const EvalSummary dist_none = run_eval(policy, distract, none);
  report(10, "distractor invariance",
         identical_obs && std::abs(dist_none.success_rate - reach_none.success_rate) <= kDistractorBand + 1e-12,
         "reach " + fmt("%.2f", reach_none.success_rate) + ", with distractors " + fmt("%.2f", dist_none.success_rate) +
             ", observations identical " + (identical_obs ? "yes" : "no"));

  std::stringstream buf;
  write_checkpoint(eps.ckpt, buf);
  const Policy reloaded = read_checkpoint(buf).policy();
  const std::string first = eval_csv(evaluate(policy, around, guided));
  const std::string second = eval_csv(evaluate(reloaded, around, guided));
  const std::string serial = eval_csv(evaluate_serial(policy, around, guided));
  report(11, "determinism", first == second && first == serial,
         std::to_string(first.size()) + " bytes; rerun " + (first == second ? "identical" : "differs") +
             ", serial " + (first == serial ? "identical" : "differs"));

  std::printf("%d failure(s), %.0f s total\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
