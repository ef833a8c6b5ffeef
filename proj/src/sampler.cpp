#include "lo3d/sampler.hpp"

#include <cmath>

#include "lo3d/errors.hpp"

namespace lo3d {

const char* to_string(SamplerKind k) { return k == SamplerKind::ddpm ? "ddpm" : "ddim"; }

SamplerKind parse_sampler_kind(const std::string& s) {
  if (s == "ddpm") return SamplerKind::ddpm;
  if (s == "ddim") return SamplerKind::ddim;
  throw ConfigError("unknown sampler '" + s + "' (expected ddpm|ddim)");
}

void SamplerConfig::validate(const NoiseSchedule& s) const {
  if (steps < 1 || steps > s.K) throw ConfigError("sampler.steps must lie in 1..K");
  if (kind == SamplerKind::ddpm && steps != s.K) throw ConfigError("ddpm sampling runs all K steps");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("sampler.eta must lie in [0, 1]");
}

std::vector<int> sampler_steps(const NoiseSchedule& s, const SamplerConfig& cfg) {
  std::vector<int> ts;
  if (cfg.kind == SamplerKind::ddpm) {
    for (int k = s.K; k >= 1; --k) ts.push_back(k);
  } else {
    const auto asc = ddim_timesteps(s, cfg.steps);
    ts.assign(asc.rbegin(), asc.rend());
  }
  return ts;
}

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(const NoiseSchedule& schedule, Trajectory mean,
                                                   Trajectory stddev)
    : schedule_(schedule), mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.rows() != stddev_.rows() || mean_.cols() != stddev_.cols())
    throw ParameterError("analytic denoiser: mean/std shape mismatch");
  if ((stddev_.array() < 0.0).any()) throw ParameterError("analytic denoiser: std must be non-negative");
}

Trajectory AnalyticGaussianDenoiser::gain(int k) const {
  const double ab = schedule_.alpha_bar_at(k);
  const Eigen::ArrayXXd s2 = stddev_.array().square();
  return (std::sqrt(ab) * s2 / (ab * s2 + (1.0 - ab))).matrix();
}

Trajectory AnalyticGaussianDenoiser::clean_posterior_mean(const Trajectory& Ak, int k) const {
  if (k < 1 || k > schedule_.K) throw ParameterError("step index outside schedule");
  const double ab = schedule_.alpha_bar_at(k);
  return mean_ + gain(k).cwiseProduct(Ak - std::sqrt(ab) * mean_);
}

Trajectory AnalyticGaussianDenoiser::predict_noise(const Trajectory& Ak, int k) const {
  const double ab = schedule_.alpha_bar_at(k);
  return (Ak - std::sqrt(ab) * clean_posterior_mean(Ak, k)) / std::sqrt(1.0 - ab);
}

Trajectory AnalyticGaussianDenoiser::noise_vjp(const Trajectory& Ak, int k, const Trajectory& cotangent) const {
  if (Ak.rows() != mean_.rows() || Ak.cols() != mean_.cols()) throw ParameterError("vjp: shape mismatch");
  const double ab = schedule_.alpha_bar_at(k);
  const Eigen::ArrayXXd jac = (1.0 - std::sqrt(ab) * gain(k).array()) / std::sqrt(1.0 - ab);
  return (jac * cotangent.array()).matrix();
}

Trajectory ddpm_step(const NoiseSchedule& s, const NoisePredictor& model, const Trajectory& Ak, int k,
                     const Trajectory& z) {
  const Trajectory eps = model.predict_noise(Ak, k);
  Trajectory next = posterior_mean(s, Ak, eps, k);
  const double sigma = s.sigma_at(k);
  if (sigma != 0.0) next += sigma * z;
  return next;
}

Trajectory ddpm_step(const NoiseSchedule& s, const NoisePredictor& model, const Trajectory& Ak, int k, Rng& rng) {
  const Trajectory z = rng.normal_matrix(Ak.rows(), Ak.cols());
  return ddpm_step(s, model, Ak, k, z);
}

namespace {

Trajectory ddim_update(const NoiseSchedule& s, const Trajectory& Ak, const Trajectory& eps, int k, int k_prev,
                       double eta, const Trajectory& z, bool clamp_clean) {
  const double sigma = ddim_sigma(s, k, k_prev, eta);
  const double ab_prev = s.alpha_bar_at(k_prev);
  double dir_var = 1.0 - ab_prev - sigma * sigma;
  if (dir_var < 0.0) {
    if (dir_var < -1e-12)
      throw ParameterError("ddim step " + std::to_string(k) + "->" + std::to_string(k_prev) +
                           ": eta too large for this subsampled schedule");
    dir_var = 0.0;
  }
  const Trajectory clean = estimate_clean(s, Ak, eps, k, clamp_clean);
  const double ab = s.alpha_bar_at(k);
  // Noise consistent with the clamped estimate.
  const Trajectory direction = clamp_clean ? Trajectory((Ak - std::sqrt(ab) * clean) / std::sqrt(1.0 - ab)) : eps;
  Trajectory next = std::sqrt(ab_prev) * clean + std::sqrt(dir_var) * direction;
  if (sigma != 0.0) next += sigma * z;
  return next;
}

}  // namespace

Trajectory ddim_step(const NoiseSchedule& s, const NoisePredictor& model, const Trajectory& Ak, int k, int k_prev,
                     double eta, const Trajectory& z, bool clamp_clean) {
  return ddim_update(s, Ak, model.predict_noise(Ak, k), k, k_prev, eta, z, clamp_clean);
}

Trajectory ddim_step(const NoiseSchedule& s, const NoisePredictor& model, const Trajectory& Ak, int k, int k_prev,
                     double eta, Rng& rng, bool clamp_clean) {
  const Trajectory z = rng.normal_matrix(Ak.rows(), Ak.cols());
  return ddim_step(s, model, Ak, k, k_prev, eta, z, clamp_clean);
}

Trajectory guided_sample_with_noise(const NoiseSchedule& s, const NoisePredictor& model, const Guidance* guidance,
                                    const SamplerConfig& cfg, std::span<const Trajectory> noise, bool skip_last,
                                    SampleDiagnostics* diag) {
  const std::vector<int> ts = sampler_steps(s, cfg);
  if (noise.size() != ts.size() + 1) throw ParameterError("guided sampler needs A_K plus one noise draw per step");
  const bool guided = guidance && guidance->config.mode != GuidanceMode::none;
  GuidanceConfig gcfg;
  if (guided) gcfg = guidance->config;

  Trajectory A = noise[0];
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int k = ts[i];
    const int k_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    const Trajectory& z = noise[i + 1];
    const Trajectory eps = model.predict_noise(A, k);

    Trajectory next;
    if (cfg.kind == SamplerKind::ddpm) {
      next = posterior_mean(s, A, eps, k);
      const double sigma = s.sigma_at(k);
      if (sigma != 0.0) next += sigma * z;
    } else {
      next = ddim_update(s, A, eps, k, k_prev, cfg.eta, z, cfg.clamp_clean);
    }

    const bool last = i + 1 == ts.size();
    if (guided && !(skip_last && last)) {
      int fallbacks = 0;
      const Trajectory g =
          guidance_gradient(gcfg, s, model, A, k, guidance->closest, guidance->action_stats, &eps, &fallbacks,
                            cfg.clamp_clean);
      const Trajectory push = gcfg.rho * g;
      next -= push;
      if (diag) {
        ++diag->guidance_evaluations;
        diag->fallbacks += fallbacks;
        diag->guidance_displacement += push.norm();
      }
    }
    if (!next.allFinite()) throw SamplerDivergence(k, "non-finite trajectory");
    A = std::move(next);
  }
  return A;
}

Trajectory guided_sample(const NoiseSchedule& s, const NoisePredictor& model, const Guidance* guidance,
                         const SamplerConfig& cfg, int horizon, int action_dim, Rng& rng, bool skip_last,
                         SampleDiagnostics* diag) {
  const std::size_t n_steps = sampler_steps(s, cfg).size();
  std::vector<Trajectory> noise;
  noise.reserve(n_steps + 1);
  for (std::size_t i = 0; i <= n_steps; ++i) noise.push_back(rng.normal_matrix(horizon, action_dim));
  return guided_sample_with_noise(s, model, guidance, cfg, noise, skip_last, diag);
}

Trajectory last_step_ablation(const NoiseSchedule& s, const NoisePredictor& model, const Guidance* guidance,
                              const SamplerConfig& cfg, int horizon, int action_dim, Rng& rng, bool skip_last,
                              SampleDiagnostics* diag) {
  return guided_sample(s, model, guidance, cfg, horizon, action_dim, rng, skip_last, diag);
}

}  // namespace lo3d
