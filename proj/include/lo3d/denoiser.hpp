#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lo3d/normalization.hpp"
#include "lo3d/schedule.hpp"

namespace lo3d {

enum class PredictionType : std::uint8_t { epsilon = 0, sample = 1 };
enum class EncoderMode : std::uint8_t { mlp = 0, mlp_residual = 1 };

const char* to_string(PredictionType p);
const char* to_string(EncoderMode m);
PredictionType parse_prediction_type(const std::string& s);
EncoderMode parse_encoder_mode(const std::string& s);

struct DenoiserDims {
  int horizon = 16;      // n waypoints per plan
  int action_dim = 2;
  int point_dim = 2;     // d
  int state_dim = 3;     // end-effector position + gripper
  int obs_horizon = 2;   // stacked observation frames
  int num_points = 64;   // points per cloud after downsampling
  int point_hidden = 64;
  int feature_dim = 64;
  int time_embed_dim = 64;
  std::vector<int> trunk_hidden = {256, 256, 256};

  int traj_size() const { return horizon * action_dim; }
  int cond_dim() const { return obs_horizon * (feature_dim + state_dim); }
  int trunk_input() const { return traj_size() + time_embed_dim; }
  void validate() const;

  friend bool operator==(const DenoiserDims&, const DenoiserDims&) = default;
};

struct Linear {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
};

/// Weights of the conditional noise predictor.
///
/// Point encoder: per-point block 1 (point1), block 2 (point2) with an optional
/// additive skip around block 2, channel max-pool, then `project` to the
/// feature width. Each observation frame is encoded separately; the frame
/// features and robot states form the conditioning vector. For every trunk
/// hidden layer, `film_scale`/`film_shift` map SiLU(cond) to per-channel
/// gamma/beta applied after the layer's activation.
struct DenoiserParams {
  DenoiserDims dims;
  PredictionType prediction = PredictionType::epsilon;
  EncoderMode encoder = EncoderMode::mlp_residual;

  Linear point1, point2, project;
  std::vector<Linear> film_scale, film_shift;
  std::vector<Linear> trunk;
  Linear head;

  // Visits every Linear in declaration order (the checkpoint order).
  template <class F>
  void for_each_layer(F&& f) {
    visit_layers(*this, f);
  }
  template <class F>
  void for_each_layer(F&& f) const {
    visit_layers(*this, f);
  }

  std::size_t parameter_count() const;
  DenoiserParams zeros_like() const;
  bool all_finite() const;

 private:
  template <class Self, class F>
  static void visit_layers(Self& self, F& f) {
    f(self.point1);
    f(self.point2);
    f(self.project);
    for (auto& l : self.film_scale) f(l);
    for (auto& l : self.film_shift) f(l);
    for (auto& l : self.trunk) f(l);
    f(self.head);
  }
};

DenoiserParams init_denoiser(const DenoiserDims& dims, PredictionType prediction, EncoderMode encoder,
                             std::uint64_t seed);

/// T_o stacked frames of (cloud, robot state). Clouds are P x d, one point per row.
struct Observation {
  std::vector<Eigen::MatrixXd> clouds;
  std::vector<Eigen::VectorXd> states;

  friend bool operator==(const Observation&, const Observation&) = default;
};

Observation normalize_observation(const NormalizationStats& stats, const Observation& obs);

// Waypoint-major flattening: element (i, j) of an n x a trajectory maps to i * a + j.
Eigen::VectorXd flatten(const Trajectory& t);
Trajectory unflatten(const Eigen::VectorXd& v, int horizon, int action_dim);

/// Encoder output for one normalized cloud (P x d). Order independent.
Eigen::VectorXd encode_points(const DenoiserParams& params, const Eigen::MatrixXd& cloud);

/// Batched network input. Column layout of `points`: item b, frame f, point p
/// lives at column (b * T_o + f) * P + p. `states` stacks the T_o frame states.
struct DenoiserBatch {
  Eigen::MatrixXd points;  // d x (B * T_o * P)
  Eigen::MatrixXd states;  // (T_o * state_dim) x B
  Eigen::MatrixXd traj;    // traj_size x B, flattened noisy trajectories
  std::vector<int> steps;  // diffusion index per item

  Eigen::Index batch_size() const { return traj.cols(); }
};

DenoiserBatch make_batch(const DenoiserParams& params, const std::vector<Observation>& obs,
                         const std::vector<Trajectory>& trajectories, const std::vector<int>& steps);

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd u_pre, u, v_pre, v, merged;
  Eigen::MatrixXd u_slope, v_slope;  // SiLU derivatives, filled only for backward
  Eigen::MatrixXd pooled;
  std::vector<Eigen::Index> argmax;  // column of the winning point per (channel, cloud)
  Eigen::MatrixXd cond, cond_act;
  std::vector<Eigen::MatrixXd> gamma, beta;
  std::vector<Eigen::MatrixXd> layer_in, pre, act;
  Eigen::MatrixXd trunk_out;
};

/// Raw network output for a batch (traj_size x B): noise in epsilon mode,
/// the clean trajectory in sample mode.
Eigen::MatrixXd forward(const DenoiserParams& params, const DenoiserBatch& batch, ForwardCache* cache = nullptr);

/// Reverse pass for d(loss)/d(output) = d_out. Accumulates into `grads` when
/// non-null; writes d(loss)/d(traj) into `d_traj` when non-null.
void backward(const DenoiserParams& params, const DenoiserBatch& batch, const ForwardCache& cache,
              const Eigen::MatrixXd& d_out, DenoiserParams* grads, Eigen::MatrixXd* d_traj);

/// Interface consumed by the samplers: noise prediction bound to one
/// observation, plus its vector-Jacobian product with respect to Ak.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual Trajectory predict_noise(const Trajectory& Ak, int k) const = 0;
  virtual Trajectory noise_vjp(const Trajectory& Ak, int k, const Trajectory& cotangent) const = 0;
};

/// A trained network with its observation-dependent FiLM coefficients
/// computed once, so each denoising step only runs the trunk.
class ConditionedDenoiser : public NoisePredictor {
 public:
  // `normalized_obs` must already be normalized.
  ConditionedDenoiser(const DenoiserParams& params, const NoiseSchedule& schedule, const Observation& normalized_obs);

  Trajectory predict_noise(const Trajectory& Ak, int k) const override;
  Trajectory noise_vjp(const Trajectory& Ak, int k, const Trajectory& cotangent) const override;

  // Output before the sample->noise conversion.
  Trajectory predict_raw(const Trajectory& Ak, int k) const;

 private:
  Eigen::VectorXd trunk_forward(const Eigen::VectorXd& x0, std::vector<Eigen::VectorXd>* pre,
                                std::vector<Eigen::VectorXd>* act) const;

  const DenoiserParams& params_;
  const NoiseSchedule& schedule_;
  std::vector<Eigen::VectorXd> gamma_, beta_;
};

/// eps_theta(Ak, k, O) for a normalized observation. Sample-mode output is
/// converted to the implied noise.
Trajectory predict_noise(const DenoiserParams& params, const NoiseSchedule& schedule, const Trajectory& Ak, int k,
                         const Observation& normalized_obs);

/// (d eps_theta / d Ak)^T cotangent.
Trajectory denoiser_vjp(const DenoiserParams& params, const NoiseSchedule& schedule, const Trajectory& Ak, int k,
                        const Observation& normalized_obs, const Trajectory& cotangent);

}  // namespace lo3d
