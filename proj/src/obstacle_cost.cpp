#include "lo3d/obstacle_cost.hpp"

#include <cmath>

#include "lo3d/errors.hpp"
#include "lo3d/kernels.hpp"

namespace lo3d {

namespace {

constexpr double kCoincident = 1e-9;

double masked_distance(const Trajectory& A, Eigen::Index i, const Eigen::VectorXd& c, const std::vector<int>& mask) {
  double s = 0.0;
  for (int m : mask) {
    const double diff = A(i, m) - c[m];
    s += diff * diff;
  }
  return std::sqrt(s);
}

void check_mask(const Trajectory& A, const Eigen::VectorXd& c, const std::vector<int>& mask) {
  if (mask.empty()) throw ParameterError("coord_mask must be nonempty");
  for (int m : mask)
    if (m < 0 || m >= A.cols() || m >= c.size()) throw ParameterError("coord_mask index out of range");
}

}  // namespace

const char* to_string(GuidanceMode m) {
  switch (m) {
    case GuidanceMode::none: return "none";
    case GuidanceMode::clean_estimate: return "clean_estimate";
    case GuidanceMode::noisy_baseline: return "noisy_baseline";
  }
  return "?";
}

const char* to_string(GradMode m) { return m == GradMode::full_vjp ? "full_vjp" : "frozen_eps"; }

GuidanceMode parse_guidance_mode(const std::string& s) {
  if (s == "none") return GuidanceMode::none;
  if (s == "clean_estimate") return GuidanceMode::clean_estimate;
  if (s == "noisy_baseline") return GuidanceMode::noisy_baseline;
  throw ConfigError("unknown guidance mode '" + s + "' (expected none|clean_estimate|noisy_baseline)");
}

GradMode parse_grad_mode(const std::string& s) {
  if (s == "full_vjp") return GradMode::full_vjp;
  if (s == "frozen_eps") return GradMode::frozen_eps;
  throw ConfigError("unknown grad mode '" + s + "' (expected full_vjp|frozen_eps)");
}

void GuidanceConfig::validate(int action_dim) const {
  if (!std::isfinite(rho) || rho < 0.0) throw ConfigError("guidance.rho must be finite and >= 0");
  if (!(q_star > 0.0) || !std::isfinite(q_star)) throw ConfigError("guidance.q_star must be positive");
  if (coord_mask.empty()) throw ConfigError("guidance.coord_mask must be nonempty");
  for (int m : coord_mask)
    if (m < 0 || m >= action_dim) throw ConfigError("guidance.coord_mask index out of range");
}

std::optional<Eigen::VectorXd> closest_point(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& ee) {
  return kernels::closest_point_parallel(clouds, ee);
}

double trajectory_cost(const Trajectory& A, const Eigen::VectorXd& closest, double q_star,
                       const std::vector<int>& coord_mask) {
  check_mask(A, closest, coord_mask);
  double cost = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) cost += std::max(0.0, q_star - masked_distance(A, i, closest, coord_mask));
  return cost;
}

CostGradient cost_gradient(const Trajectory& A, const Eigen::VectorXd& closest, double q_star,
                           const std::vector<int>& coord_mask) {
  check_mask(A, closest, coord_mask);
  CostGradient out{Trajectory::Zero(A.rows(), A.cols()), 0};
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double dist = masked_distance(A, i, closest, coord_mask);
    if (dist > q_star) continue;
    if (dist < kCoincident) {
      out.gradient(i, coord_mask.front()) = -1.0;
      ++out.fallbacks;
      continue;
    }
    for (int m : coord_mask) out.gradient(i, m) = -(A(i, m) - closest[m]) / dist;
  }
  return out;
}

Trajectory guidance_gradient(const GuidanceConfig& cfg, const NoiseSchedule& schedule, const NoisePredictor& model,
                             const Trajectory& Ak, int k, const Eigen::VectorXd& closest, const MinMax& action_stats,
                             const Trajectory* eps_hint, int* fallbacks, bool clamp_clean) {
  if (cfg.mode == GuidanceMode::none) throw ParameterError("guidance_gradient called with mode none");
  if (action_stats.dim() != Ak.cols()) throw ParameterError("action normalization does not match trajectory");
  const Eigen::RowVectorXd scale = action_stats.half_range().transpose();

  auto world_gradient = [&](const Trajectory& normalized) {
    CostGradient g = cost_gradient(action_stats.unnormalize_rows(normalized), closest, cfg.q_star, cfg.coord_mask);
    if (fallbacks) *fallbacks += g.fallbacks;
    // d cost / d normalized = d cost / d world * d world / d normalized
    return Trajectory(g.gradient.array().rowwise() * scale.array());
  };

  if (cfg.mode == GuidanceMode::noisy_baseline) return world_gradient(Ak);

  const Trajectory eps = eps_hint ? *eps_hint : model.predict_noise(Ak, k);
  const Trajectory clean = estimate_clean(schedule, Ak, eps, k, clamp_clean);
  const Trajectory u = world_gradient(clean);
  const double ab = schedule.alpha_bar_at(k);
  if (cfg.grad_mode == GradMode::frozen_eps || u.isZero(0.0)) return u / std::sqrt(ab);
  return (u - std::sqrt(1.0 - ab) * model.noise_vjp(Ak, k, u)) / std::sqrt(ab);
}

}  // namespace lo3d
