#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lo3d/denoiser.hpp"
#include "lo3d/normalization.hpp"
#include "lo3d/schedule.hpp"

namespace lo3d {

enum class GuidanceMode { none, clean_estimate, noisy_baseline };
enum class GradMode { full_vjp, frozen_eps };

const char* to_string(GuidanceMode m);
const char* to_string(GradMode m);
GuidanceMode parse_guidance_mode(const std::string& s);
GradMode parse_grad_mode(const std::string& s);

struct GuidanceConfig {
  double rho = 0.0;
  double q_star = 0.1;  // world units
  GuidanceMode mode = GuidanceMode::none;
  GradMode grad_mode = GradMode::full_vjp;
  std::vector<int> coord_mask = {0, 1};

  void validate(int action_dim) const;
};

/// Obstacle point nearest to `ee` over all clouds (full-dimension distance,
/// first occurrence wins ties). nullopt when there is no obstacle point.
std::optional<Eigen::VectorXd> closest_point(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& ee);

/// sum_i max(0, q_star - dist(a_i, C)) over waypoints, distance on masked dims.
/// `A` is in world units.
double trajectory_cost(const Trajectory& A, const Eigen::VectorXd& closest, double q_star,
                       const std::vector<int>& coord_mask);

struct CostGradient {
  Trajectory gradient;
  int fallbacks = 0;  // waypoints coincident with the closest point
};

/// Gradient of trajectory_cost. Rows with dist <= q_star get -(a_i - C)/dist on
/// the masked dims; all other entries are zero. A waypoint within 1e-9 of C
/// gets -e_{mask[0]} and is counted in `fallbacks`.
CostGradient cost_gradient(const Trajectory& A, const Eigen::VectorXd& closest, double q_star,
                           const std::vector<int>& coord_mask);

/// Guidance term in normalized action units for the noisy trajectory Ak.
///
/// clean_estimate: cost evaluated at the clean estimate A0|k and pulled back to
/// Ak, either treating the noise prediction as constant (frozen_eps) or through
/// the network's VJP (full_vjp). The clip in the clean estimate is treated as
/// identity for the pull-back. noisy_baseline: cost evaluated at Ak itself and
/// the model is never queried. `eps_hint`, when given, must equal
/// model.predict_noise(Ak, k) and saves one forward pass.
Trajectory guidance_gradient(const GuidanceConfig& cfg, const NoiseSchedule& schedule, const NoisePredictor& model,
                             const Trajectory& Ak, int k, const Eigen::VectorXd& closest, const MinMax& action_stats,
                             const Trajectory* eps_hint = nullptr, int* fallbacks = nullptr,
                             bool clamp_clean = true);

}  // namespace lo3d
