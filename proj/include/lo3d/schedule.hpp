#pragma once

#include <vector>

#include <Eigen/Dense>

namespace lo3d {

/// n x action_dim waypoint array; the diffusion variable.
using Trajectory = Eigen::MatrixXd;

enum class ScheduleKind { linear };

/// Per-step diffusion coefficients.
///
/// Step indices k run 1..K, k = K being pure noise. Storage is 0-based:
/// `beta[k-1]` holds beta_k. Use the accessors, which take the 1-based k
/// and also accept k = 0 for alpha_bar (alpha_bar_0 = 1 by convention).
struct NoiseSchedule {
  int K = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> sigma;  // DDPM posterior std, sigma_1 = 0

  double beta_at(int k) const { return beta.at(k - 1); }
  double alpha_at(int k) const { return alpha.at(k - 1); }
  double alpha_bar_at(int k) const { return k == 0 ? 1.0 : alpha_bar.at(k - 1); }
  double sigma_at(int k) const { return sigma.at(k - 1); }
};

NoiseSchedule make_schedule(int K, ScheduleKind kind = ScheduleKind::linear, double beta_start = 1e-3,
                            double beta_end = 0.2);

// Builds a schedule from an explicit beta list; used by tests and toy setups.
NoiseSchedule schedule_from_betas(std::vector<double> beta);

/// sqrt(abar_k) A0 + sqrt(1 - abar_k) eps.
Trajectory forward_diffuse(const NoiseSchedule& s, const Trajectory& A0, int k, const Trajectory& eps);

/// Reverse-step mean (1/sqrt(alpha_k)) (Ak - (1 - alpha_k)/sqrt(1 - abar_k) eps_hat).
Trajectory posterior_mean(const NoiseSchedule& s, const Trajectory& Ak, const Trajectory& eps_hat, int k);

/// (Ak - sqrt(1 - abar_k) eps_hat) / sqrt(abar_k), optionally clipped to [-1, 1].
Trajectory estimate_clean(const NoiseSchedule& s, const Trajectory& Ak, const Trajectory& eps_hat, int k,
                          bool clamp = true);

/// Noise implied by a clean-sample prediction: inverse of estimate_clean (no clamp).
Trajectory implied_noise(const NoiseSchedule& s, const Trajectory& Ak, const Trajectory& A0_hat, int k);

/// DDIM posterior std between k and k_prev, scaled by eta. Equals eta * sigma_k
/// when k_prev = k - 1.
double ddim_sigma(const NoiseSchedule& s, int k, int k_prev, double eta);

/// Evenly spaced inference indices over 1..K, strictly increasing, last = K.
std::vector<int> ddim_timesteps(const NoiseSchedule& s, int steps);

/// Sinusoidal timestep embedding of width `dim` (even).
Eigen::VectorXd timestep_embedding(int k, int dim);

}  // namespace lo3d
