#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lo3d/denoiser.hpp"
#include "lo3d/rng.hpp"
#include "lo3d/schedule.hpp"

namespace lo3d {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  DenoiserParams m, v;
  long step = 0;
};

AdamState make_adam_state(const DenoiserParams& params);
void adam_update(DenoiserParams& params, AdamState& state, const DenoiserParams& grads, const AdamConfig& cfg);

/// One normalized (observation, clean action chunk) pair.
struct TrainingExample {
  Observation obs;
  Trajectory actions;
};

/// Diffusion loss for fixed steps/noise; gradients accumulate into `grads` if given.
/// Target is the noise (epsilon mode) or the clean chunk (sample mode).
double diffusion_loss(const DenoiserParams& params, const NoiseSchedule& schedule,
                      std::span<const TrainingExample* const> batch, const std::vector<int>& steps,
                      const std::vector<Trajectory>& noise, DenoiserParams* grads);

/// Samples k ~ U{1..K} and eps ~ N(0, I) per item, then applies one Adam update.
/// Throws TrainingError on a non-finite loss.
double train_step(DenoiserParams& params, AdamState& opt, const NoiseSchedule& schedule,
                  std::span<const TrainingExample* const> batch, Rng& rng, const AdamConfig& adam = {});

struct TrainConfig {
  int steps = 10000;
  int batch_size = 64;
  std::uint64_t seed = 0;
  AdamConfig adam;
  int loss_window = 100;      // running-mean window for the reported loss
  double stop_below = 0.0;    // stop once the running mean drops below this (0 = never)
  int min_steps = 0;          // never stop early before this many steps
};

struct TrainReport {
  std::vector<double> losses;
  std::vector<double> running;  // running mean over the window
  int steps_run = 0;
  int first_below = -1;         // first step whose running mean < stop_below
  double final_running() const { return running.empty() ? 0.0 : running.back(); }
};

TrainReport train(DenoiserParams& params, const NoiseSchedule& schedule, const std::vector<TrainingExample>& data,
                  const TrainConfig& cfg, const std::function<void(int, double)>& on_log = {}, int log_every = 0);

/// Keeps large freed blocks in the process heap instead of returning them to
/// the kernel. Training reallocates multi-megabyte batch matrices every step.
void retain_heap_memory();

}  // namespace lo3d
