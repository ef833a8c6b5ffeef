#include "lo3d/training.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <cmath>
#include <deque>
#include <string>

#include "lo3d/errors.hpp"

namespace lo3d {

AdamState make_adam_state(const DenoiserParams& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_update(DenoiserParams& params, AdamState& state, const DenoiserParams& grads, const AdamConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::vector<Linear*> ps, ms, vs;
  std::vector<const Linear*> gs;
  params.for_each_layer([&](Linear& l) { ps.push_back(&l); });
  state.m.for_each_layer([&](Linear& l) { ms.push_back(&l); });
  state.v.for_each_layer([&](Linear& l) { vs.push_back(&l); });
  grads.for_each_layer([&](const Linear& l) { gs.push_back(&l); });
  auto step = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  };
  for (std::size_t i = 0; i < ps.size(); ++i) {
    step(ps[i]->W, ms[i]->W, vs[i]->W, gs[i]->W);
    step(ps[i]->b, ms[i]->b, vs[i]->b, gs[i]->b);
  }
}

double diffusion_loss(const DenoiserParams& params, const NoiseSchedule& schedule,
                      std::span<const TrainingExample* const> batch, const std::vector<int>& steps,
                      const std::vector<Trajectory>& noise, DenoiserParams* grads) {
  if (batch.empty()) throw ParameterError("training batch is empty");
  std::vector<Observation> obs;
  std::vector<Trajectory> noisy;
  obs.reserve(batch.size());
  noisy.reserve(batch.size());
  Eigen::MatrixXd target(params.dims.traj_size(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    obs.push_back(batch[i]->obs);
    noisy.push_back(forward_diffuse(schedule, batch[i]->actions, steps[i], noise[i]));
    target.col(static_cast<Eigen::Index>(i)) =
        flatten(params.prediction == PredictionType::epsilon ? noise[i] : batch[i]->actions);
  }
  const DenoiserBatch db = make_batch(params, obs, noisy, steps);
  ForwardCache cache;
  const Eigen::MatrixXd out = forward(params, db, grads ? &cache : nullptr);
  const Eigen::MatrixXd diff = out - target;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / count;
  if (grads) backward(params, db, cache, (2.0 / count) * diff, grads, nullptr);
  return loss;
}

double train_step(DenoiserParams& params, AdamState& opt, const NoiseSchedule& schedule,
                  std::span<const TrainingExample* const> batch, Rng& rng, const AdamConfig& adam) {
  if (batch.empty()) throw ParameterError("training batch is empty");
  std::vector<int> steps(batch.size());
  std::vector<Trajectory> noise(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    steps[i] = rng.uniform_int(1, schedule.K);
    noise[i] = rng.normal_matrix(params.dims.horizon, params.dims.action_dim);
  }
  DenoiserParams grads = params.zeros_like();
  const double loss = diffusion_loss(params, schedule, batch, steps, noise, &grads);
  if (!std::isfinite(loss)) throw TrainingError("non-finite training loss at optimizer step " + std::to_string(opt.step + 1));
  if (!grads.all_finite()) throw TrainingError("non-finite gradient at optimizer step " + std::to_string(opt.step + 1));
  adam_update(params, opt, grads, adam);
  return loss;
}

TrainReport train(DenoiserParams& params, const NoiseSchedule& schedule, const std::vector<TrainingExample>& data,
                  const TrainConfig& cfg, const std::function<void(int, double)>& on_log, int log_every) {
  if (data.empty()) throw DataError("no training examples");
  if (cfg.batch_size < 1 || cfg.steps < 0) throw ParameterError("invalid training configuration");
  Rng rng(cfg.seed);
  AdamState opt = make_adam_state(params);
  TrainReport report;
  std::deque<double> window;
  double window_sum = 0.0;
  std::vector<const TrainingExample*> batch(static_cast<std::size_t>(cfg.batch_size));
  const int n = static_cast<int>(data.size());
  for (int s = 0; s < cfg.steps; ++s) {
    for (auto& b : batch) b = &data[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
    const double loss = train_step(params, opt, schedule, batch, rng, cfg.adam);
    report.losses.push_back(loss);
    window.push_back(loss);
    window_sum += loss;
    if (static_cast<int>(window.size()) > cfg.loss_window) {
      window_sum -= window.front();
      window.pop_front();
    }
    const double running = window_sum / static_cast<double>(window.size());
    report.running.push_back(running);
    report.steps_run = s + 1;
    if (on_log && log_every > 0 && (s + 1) % log_every == 0) on_log(s + 1, running);
    const bool full = static_cast<int>(window.size()) == cfg.loss_window;
    if (cfg.stop_below > 0.0 && full && running < cfg.stop_below) {
      if (report.first_below < 0) report.first_below = s + 1;
      if (s + 1 >= cfg.min_steps) break;
    }
  }
  return report;
}

void retain_heap_memory() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace lo3d
