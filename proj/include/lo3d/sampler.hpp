#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lo3d/denoiser.hpp"
#include "lo3d/normalization.hpp"
#include "lo3d/obstacle_cost.hpp"
#include "lo3d/rng.hpp"
#include "lo3d/schedule.hpp"

namespace lo3d {

enum class SamplerKind { ddpm, ddim };

const char* to_string(SamplerKind k);
SamplerKind parse_sampler_kind(const std::string& s);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::ddpm;
  int steps = 100;            // DDPM always runs every step of the schedule
  double eta = 0.0;           // DDIM stochasticity
  bool clamp_clean = true;    // clip the clean estimate to [-1, 1] inside DDIM and guidance
  std::uint64_t seed = 0;

  void validate(const NoiseSchedule& s) const;
};

/// Descending list of the step indices a sampler visits (paired with k_prev
/// = the next entry, or 0 after the last).
std::vector<int> sampler_steps(const NoiseSchedule& s, const SamplerConfig& cfg);

/// Exact noise predictor for Gaussian data A0 ~ N(m, diag(s^2)), elementwise.
class AnalyticGaussianDenoiser : public NoisePredictor {
 public:
  AnalyticGaussianDenoiser(const NoiseSchedule& schedule, Trajectory mean, Trajectory stddev);

  /// E[A0 | Ak] = m + sqrt(abar) s^2 / (abar s^2 + 1 - abar) (Ak - sqrt(abar) m).
  Trajectory clean_posterior_mean(const Trajectory& Ak, int k) const;
  Trajectory predict_noise(const Trajectory& Ak, int k) const override;
  Trajectory noise_vjp(const Trajectory& Ak, int k, const Trajectory& cotangent) const override;

  const Trajectory& mean() const { return mean_; }
  const Trajectory& stddev() const { return stddev_; }

 private:
  Trajectory gain(int k) const;  // sqrt(abar) s^2 / (abar s^2 + 1 - abar)

  const NoiseSchedule& schedule_;
  Trajectory mean_, stddev_;
};

/// One unguided DDPM reverse step mu_k + sigma_k z. At k = 1 sigma is 0.
Trajectory ddpm_step(const NoiseSchedule& s, const NoisePredictor& model, const Trajectory& Ak, int k,
                     const Trajectory& z);
Trajectory ddpm_step(const NoiseSchedule& s, const NoisePredictor& model, const Trajectory& Ak, int k, Rng& rng);

/// One DDIM step from k to k_prev with sigma = eta * ddim_sigma. Throws
/// ParameterError when 1 - abar_{k_prev} - sigma^2 < 0.
Trajectory ddim_step(const NoiseSchedule& s, const NoisePredictor& model, const Trajectory& Ak, int k, int k_prev,
                     double eta, const Trajectory& z, bool clamp_clean = true);
Trajectory ddim_step(const NoiseSchedule& s, const NoisePredictor& model, const Trajectory& Ak, int k, int k_prev,
                     double eta, Rng& rng, bool clamp_clean = true);

/// Everything the sampler needs to evaluate the obstacle guidance term.
struct Guidance {
  GuidanceConfig config;
  Eigen::VectorXd closest;  // C_ob, fixed for the whole call
  MinMax action_stats;
};

struct SampleDiagnostics {
  int guidance_evaluations = 0;
  int fallbacks = 0;
  double guidance_displacement = 0.0;  // sum of ||rho g|| over steps (normalized units)
};

/// Guided reverse process with explicit noise: noise[0] is A_K, noise[i] is
/// the z of the i-th step (in visiting order). Guidance, when active, is
/// evaluated at the current Ak and subtracted after the noise injection; with
/// `skip_last` the final step's guidance term is omitted.
Trajectory guided_sample_with_noise(const NoiseSchedule& s, const NoisePredictor& model, const Guidance* guidance,
                                    const SamplerConfig& cfg, std::span<const Trajectory> noise,
                                    bool skip_last = false, SampleDiagnostics* diag = nullptr);

/// Draws A_K and one z per step from `rng` (the same draws whatever the
/// guidance), then runs guided_sample_with_noise. Returns A0 in normalized units.
Trajectory guided_sample(const NoiseSchedule& s, const NoisePredictor& model, const Guidance* guidance,
                         const SamplerConfig& cfg, int horizon, int action_dim, Rng& rng, bool skip_last = false,
                         SampleDiagnostics* diag = nullptr);

/// guided_sample with the final step's guidance optionally removed.
Trajectory last_step_ablation(const NoiseSchedule& s, const NoisePredictor& model, const Guidance* guidance,
                              const SamplerConfig& cfg, int horizon, int action_dim, Rng& rng, bool skip_last,
                              SampleDiagnostics* diag = nullptr);

}  // namespace lo3d
