#include "lo3d/schedule.hpp"

#include <cmath>
#include <string>

#include "lo3d/errors.hpp"

namespace lo3d {

namespace {

void check_step(const NoiseSchedule& s, int k) {
  if (k < 1 || k > s.K)
    throw ParameterError("step index " + std::to_string(k) + " outside 1.." + std::to_string(s.K));
}

void check_same_shape(const Trajectory& a, const Trajectory& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ParameterError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
}

}  // namespace

NoiseSchedule schedule_from_betas(std::vector<double> beta) {
  if (beta.empty()) throw ParameterError("schedule needs at least one step");
  NoiseSchedule s;
  s.K = static_cast<int>(beta.size());
  s.beta = std::move(beta);
  s.alpha.resize(s.K);
  s.alpha_bar.resize(s.K);
  s.sigma.resize(s.K);
  double prod = 1.0;
  for (int i = 0; i < s.K; ++i) {
    const double b = s.beta[i];
    if (!(b > 0.0 && b < 1.0)) throw ParameterError("beta must lie in (0, 1)");
    s.alpha[i] = 1.0 - b;
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  for (int k = 1; k <= s.K; ++k) {
    const double ab = s.alpha_bar_at(k);
    const double ab_prev = s.alpha_bar_at(k - 1);
    s.sigma[k - 1] = std::sqrt(s.beta_at(k) * (1.0 - ab_prev) / (1.0 - ab));
  }
  s.sigma[0] = 0.0;
  return s;
}

NoiseSchedule make_schedule(int K, ScheduleKind kind, double beta_start, double beta_end) {
  if (K < 1) throw ParameterError("schedule step count must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ParameterError("schedule requires 0 < beta_start <= beta_end < 1");
  std::vector<double> beta(K);
  switch (kind) {
    case ScheduleKind::linear:
      for (int i = 0; i < K; ++i)
        beta[i] = K == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (K - 1);
      break;
  }
  return schedule_from_betas(std::move(beta));
}

Trajectory forward_diffuse(const NoiseSchedule& s, const Trajectory& A0, int k, const Trajectory& eps) {
  check_step(s, k);
  check_same_shape(A0, eps, "forward_diffuse");
  const double ab = s.alpha_bar_at(k);
  return std::sqrt(ab) * A0 + std::sqrt(1.0 - ab) * eps;
}

Trajectory posterior_mean(const NoiseSchedule& s, const Trajectory& Ak, const Trajectory& eps_hat, int k) {
  check_step(s, k);
  check_same_shape(Ak, eps_hat, "posterior_mean");
  const double a = s.alpha_at(k);
  const double ab = s.alpha_bar_at(k);
  return (Ak - ((1.0 - a) / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(a);
}

Trajectory estimate_clean(const NoiseSchedule& s, const Trajectory& Ak, const Trajectory& eps_hat, int k,
                          bool clamp) {
  check_step(s, k);
  check_same_shape(Ak, eps_hat, "estimate_clean");
  const double ab = s.alpha_bar_at(k);
  Trajectory A0 = (Ak - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
  if (clamp) A0 = A0.cwiseMax(-1.0).cwiseMin(1.0);
  return A0;
}

Trajectory implied_noise(const NoiseSchedule& s, const Trajectory& Ak, const Trajectory& A0_hat, int k) {
  check_step(s, k);
  check_same_shape(Ak, A0_hat, "implied_noise");
  const double ab = s.alpha_bar_at(k);
  return (Ak - std::sqrt(ab) * A0_hat) / std::sqrt(1.0 - ab);
}

double ddim_sigma(const NoiseSchedule& s, int k, int k_prev, double eta) {
  check_step(s, k);
  if (k_prev < 0 || k_prev >= k) throw ParameterError("ddim step requires 0 <= k_prev < k");
  const double ab = s.alpha_bar_at(k);
  const double ab_prev = s.alpha_bar_at(k_prev);
  const double var = (1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev);
  return eta * std::sqrt(std::max(var, 0.0));
}

std::vector<int> ddim_timesteps(const NoiseSchedule& s, int steps) {
  if (steps < 1 || steps > s.K)
    throw ParameterError("inference steps must lie in 1.." + std::to_string(s.K));
  std::vector<int> ts(steps);
  for (int i = 1; i <= steps; ++i)
    ts[i - 1] = static_cast<int>((static_cast<long long>(i) * s.K) / steps);
  return ts;
}

Eigen::VectorXd timestep_embedding(int k, int dim) {
  if (dim < 2 || dim % 2 != 0) throw ParameterError("timestep embedding width must be even");
  const int half = dim / 2;
  Eigen::VectorXd e(dim);
  const double scale = half > 1 ? std::log(10000.0) / (half - 1) : 0.0;
  for (int i = 0; i < half; ++i) {
    const double arg = k * std::exp(-scale * i);
    e[i] = std::sin(arg);
    e[half + i] = std::cos(arg);
  }
  return e;
}

}  // namespace lo3d
