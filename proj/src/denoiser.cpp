#include "lo3d/denoiser.hpp"

#include <cmath>
#include <string>

#include "lo3d/errors.hpp"
#include "lo3d/rng.hpp"

namespace lo3d {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Scalar exp keeps each activation independent of its position in the
// matrix, so permuting points permutes features exactly.
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd silu(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

void silu_with_slope(const MatrixXd& x, MatrixXd& act, MatrixXd* slope) {
  act.resize(x.rows(), x.cols());
  if (slope) slope->resize(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    const double s = sigmoid(v);
    act.data()[i] = v * s;
    if (slope) slope->data()[i] = s * (1.0 + v * (1.0 - s));
  }
}

MatrixXd silu_grad(const MatrixXd& x) {
  return x.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

Linear make_linear(int out, int in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.W.resize(out, in);
  l.b.resize(out);
  for (Index j = 0; j < in; ++j)
    for (Index i = 0; i < out; ++i) l.W(i, j) = rng.uniform(-bound, bound);
  for (Index i = 0; i < out; ++i) l.b[i] = rng.uniform(-bound, bound);
  return l;
}

Linear zero_linear(int out, int in, double bias = 0.0) {
  return {MatrixXd::Zero(out, in), VectorXd::Constant(out, bias)};
}

MatrixXd affine(const Linear& l, const MatrixXd& x) { return (l.W * x).colwise() + l.b; }

void accumulate(Linear& g, const MatrixXd& d_out, const MatrixXd& in) {
  g.W.noalias() += d_out * in.transpose();
  g.b += d_out.rowwise().sum();
}

MatrixXd embed_steps(const std::vector<int>& steps, int dim) {
  MatrixXd e(dim, static_cast<Index>(steps.size()));
  for (std::size_t b = 0; b < steps.size(); ++b) e.col(static_cast<Index>(b)) = timestep_embedding(steps[b], dim);
  return e;
}

void check_batch(const DenoiserParams& p, const DenoiserBatch& batch) {
  const auto& d = p.dims;
  const Index B = batch.batch_size();
  if (B < 1) throw ParameterError("empty denoiser batch");
  if (batch.traj.rows() != d.traj_size()) throw ParameterError("trajectory size does not match network");
  if (batch.points.rows() != d.point_dim ||
      batch.points.cols() != B * d.obs_horizon * d.num_points)
    throw ParameterError("point batch does not match network dimensions");
  if (batch.states.rows() != d.obs_horizon * d.state_dim || batch.states.cols() != B)
    throw ParameterError("state batch does not match network dimensions");
  if (static_cast<Index>(batch.steps.size()) != B) throw ParameterError("one diffusion step per item required");
}

}  // namespace

const char* to_string(PredictionType p) { return p == PredictionType::epsilon ? "epsilon" : "sample"; }
const char* to_string(EncoderMode m) { return m == EncoderMode::mlp ? "mlp" : "mlp-residual"; }

PredictionType parse_prediction_type(const std::string& s) {
  if (s == "epsilon") return PredictionType::epsilon;
  if (s == "sample") return PredictionType::sample;
  throw ConfigError("unknown prediction type '" + s + "' (expected epsilon|sample)");
}

EncoderMode parse_encoder_mode(const std::string& s) {
  if (s == "mlp") return EncoderMode::mlp;
  if (s == "mlp-residual") return EncoderMode::mlp_residual;
  throw ConfigError("unknown encoder mode '" + s + "' (expected mlp|mlp-residual)");
}

void DenoiserDims::validate() const {
  if (horizon < 1 || action_dim < 1 || point_dim < 1 || state_dim < 0 || obs_horizon < 1 || num_points < 1 ||
      point_hidden < 1 || feature_dim < 1 || time_embed_dim < 2 || time_embed_dim % 2 != 0)
    throw ParameterError("invalid denoiser dimensions");
  if (trunk_hidden.empty()) throw ParameterError("trunk needs at least one hidden layer");
  for (int h : trunk_hidden)
    if (h < 1) throw ParameterError("trunk widths must be positive");
}

std::size_t DenoiserParams::parameter_count() const {
  std::size_t n = 0;
  for_each_layer([&](const Linear& l) { n += static_cast<std::size_t>(l.W.size() + l.b.size()); });
  return n;
}

DenoiserParams DenoiserParams::zeros_like() const {
  DenoiserParams z = *this;
  z.for_each_layer([](Linear& l) {
    l.W.setZero();
    l.b.setZero();
  });
  return z;
}

bool DenoiserParams::all_finite() const {
  bool ok = true;
  for_each_layer([&](const Linear& l) { ok = ok && l.W.allFinite() && l.b.allFinite(); });
  return ok;
}

DenoiserParams init_denoiser(const DenoiserDims& dims, PredictionType prediction, EncoderMode encoder,
                             std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  DenoiserParams p;
  p.dims = dims;
  p.prediction = prediction;
  p.encoder = encoder;
  p.point1 = make_linear(dims.point_hidden, dims.point_dim, rng);
  p.point2 = make_linear(dims.point_hidden, dims.point_hidden, rng);
  p.project = make_linear(dims.feature_dim, dims.point_hidden, rng);
  for (int h : dims.trunk_hidden) {
    p.film_scale.push_back(zero_linear(h, dims.cond_dim(), 1.0));
    p.film_shift.push_back(zero_linear(h, dims.cond_dim(), 0.0));
  }
  int in = dims.trunk_input();
  for (int h : dims.trunk_hidden) {
    p.trunk.push_back(make_linear(h, in, rng));
    in = h;
  }
  p.head = zero_linear(dims.traj_size(), in);
  return p;
}

Observation normalize_observation(const NormalizationStats& stats, const Observation& obs) {
  Observation out;
  out.clouds.reserve(obs.clouds.size());
  for (const auto& c : obs.clouds) out.clouds.push_back(stats.cloud.normalize_rows(c));
  for (const auto& s : obs.states) out.states.push_back(stats.state.normalize(s));
  return out;
}

VectorXd flatten(const Trajectory& t) {
  VectorXd v(t.size());
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j) v[i * t.cols() + j] = t(i, j);
  return v;
}

Trajectory unflatten(const VectorXd& v, int horizon, int action_dim) {
  if (v.size() != static_cast<Index>(horizon) * action_dim) throw ParameterError("unflatten: size mismatch");
  Trajectory t(horizon, action_dim);
  for (Index i = 0; i < horizon; ++i)
    for (Index j = 0; j < action_dim; ++j) t(i, j) = v[i * action_dim + j];
  return t;
}

VectorXd encode_points(const DenoiserParams& params, const MatrixXd& cloud) {
  if (cloud.rows() < 1) throw ParameterError("encode_points: empty cloud");
  if (cloud.cols() != params.dims.point_dim) throw ParameterError("encode_points: point dimension mismatch");
  const MatrixXd x = cloud.transpose();
  const MatrixXd u = silu(affine(params.point1, x));
  MatrixXd merged = silu(affine(params.point2, u));
  if (params.encoder == EncoderMode::mlp_residual) merged += u;
  const VectorXd pooled = merged.rowwise().maxCoeff();
  return params.project.W * pooled + params.project.b;
}

DenoiserBatch make_batch(const DenoiserParams& params, const std::vector<Observation>& obs,
                         const std::vector<Trajectory>& trajectories, const std::vector<int>& steps) {
  const auto& d = params.dims;
  const Index B = static_cast<Index>(obs.size());
  if (static_cast<Index>(trajectories.size()) != B || static_cast<Index>(steps.size()) != B)
    throw ParameterError("make_batch: inconsistent batch lengths");
  DenoiserBatch batch;
  batch.points.resize(d.point_dim, B * d.obs_horizon * d.num_points);
  batch.states.resize(d.obs_horizon * d.state_dim, B);
  batch.traj.resize(d.traj_size(), B);
  batch.steps = steps;
  for (Index b = 0; b < B; ++b) {
    const Observation& o = obs[b];
    if (static_cast<int>(o.clouds.size()) != d.obs_horizon || static_cast<int>(o.states.size()) != d.obs_horizon)
      throw ParameterError("observation frame count does not match obs_horizon");
    for (int f = 0; f < d.obs_horizon; ++f) {
      const MatrixXd& c = o.clouds[f];
      if (c.rows() != d.num_points || c.cols() != d.point_dim)
        throw ParameterError("cloud must be num_points x point_dim");
      if (o.states[f].size() != d.state_dim) throw ParameterError("state dimension mismatch");
      batch.points.middleCols((b * d.obs_horizon + f) * d.num_points, d.num_points) = c.transpose();
      batch.states.block(f * d.state_dim, b, d.state_dim, 1) = o.states[f];
    }
    const Trajectory& t = trajectories[b];
    if (t.rows() != d.horizon || t.cols() != d.action_dim) throw ParameterError("trajectory shape mismatch");
    batch.traj.col(b) = flatten(t);
  }
  return batch;
}

MatrixXd forward(const DenoiserParams& p, const DenoiserBatch& batch, ForwardCache* cache) {
  check_batch(p, batch);
  const auto& d = p.dims;
  const Index B = batch.batch_size();
  const Index clouds = B * d.obs_horizon;
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  // Point encoder.
  c.u_pre = affine(p.point1, batch.points);
  silu_with_slope(c.u_pre, c.u, cache ? &c.u_slope : nullptr);
  c.v_pre = affine(p.point2, c.u);
  silu_with_slope(c.v_pre, c.v, cache ? &c.v_slope : nullptr);
  c.merged = p.encoder == EncoderMode::mlp_residual ? MatrixXd(c.u + c.v) : c.v;
  const Index H = d.point_hidden;
  c.pooled.resize(H, clouds);
  c.argmax.assign(static_cast<std::size_t>(H * clouds), 0);
  for (Index q = 0; q < clouds; ++q) {
    const Index base = q * d.num_points;
    for (Index ch = 0; ch < H; ++ch) {
      Index best = base;
      double best_v = c.merged(ch, base);
      for (Index i = 1; i < d.num_points; ++i) {
        const double v = c.merged(ch, base + i);
        if (v > best_v) {
          best_v = v;
          best = base + i;
        }
      }
      c.pooled(ch, q) = best_v;
      c.argmax[static_cast<std::size_t>(q * H + ch)] = best;
    }
  }
  const MatrixXd feat = affine(p.project, c.pooled);

  // Conditioning vector: frame features then frame states.
  const Index F = d.feature_dim;
  c.cond.resize(d.cond_dim(), B);
  for (Index b = 0; b < B; ++b) {
    for (Index f = 0; f < d.obs_horizon; ++f) c.cond.block(f * F, b, F, 1) = feat.col(b * d.obs_horizon + f);
  }
  c.cond.bottomRows(d.obs_horizon * d.state_dim) = batch.states;
  c.cond_act = silu(c.cond);

  const std::size_t L = p.trunk.size();
  c.gamma.resize(L);
  c.beta.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    c.gamma[l] = affine(p.film_scale[l], c.cond_act);
    c.beta[l] = affine(p.film_shift[l], c.cond_act);
  }

  // Trunk.
  c.layer_in.resize(L);
  c.pre.resize(L);
  c.act.resize(L);
  MatrixXd x(d.trunk_input(), B);
  x.topRows(d.traj_size()) = batch.traj;
  x.bottomRows(d.time_embed_dim) = embed_steps(batch.steps, d.time_embed_dim);
  for (std::size_t l = 0; l < L; ++l) {
    c.layer_in[l] = std::move(x);
    c.pre[l] = affine(p.trunk[l], c.layer_in[l]);
    c.act[l] = silu(c.pre[l]);
    x = c.gamma[l].cwiseProduct(c.act[l]) + c.beta[l];
  }
  c.trunk_out = std::move(x);
  return affine(p.head, c.trunk_out);
}

void backward(const DenoiserParams& p, const DenoiserBatch& batch, const ForwardCache& c, const MatrixXd& d_out,
              DenoiserParams* grads, MatrixXd* d_traj) {
  const auto& d = p.dims;
  const Index B = batch.batch_size();
  if (d_out.rows() != d.traj_size() || d_out.cols() != B) throw ParameterError("backward: d_out shape mismatch");
  const std::size_t L = p.trunk.size();

  if (grads) accumulate(grads->head, d_out, c.trunk_out);
  MatrixXd dx = p.head.W.transpose() * d_out;

  std::vector<MatrixXd> d_gamma(L), d_beta(L);
  for (std::size_t li = L; li-- > 0;) {
    if (grads) {
      d_gamma[li] = dx.cwiseProduct(c.act[li]);
      d_beta[li] = dx;
    }
    const MatrixXd d_pre = dx.cwiseProduct(c.gamma[li]).cwiseProduct(silu_grad(c.pre[li]));
    if (grads) accumulate(grads->trunk[li], d_pre, c.layer_in[li]);
    dx = p.trunk[li].W.transpose() * d_pre;
  }
  if (d_traj) *d_traj = dx.topRows(d.traj_size());
  if (!grads) return;

  MatrixXd d_cond_act = MatrixXd::Zero(d.cond_dim(), B);
  for (std::size_t l = 0; l < L; ++l) {
    accumulate(grads->film_scale[l], d_gamma[l], c.cond_act);
    accumulate(grads->film_shift[l], d_beta[l], c.cond_act);
    d_cond_act.noalias() += p.film_scale[l].W.transpose() * d_gamma[l];
    d_cond_act.noalias() += p.film_shift[l].W.transpose() * d_beta[l];
  }
  const MatrixXd d_cond = d_cond_act.cwiseProduct(silu_grad(c.cond));

  const Index F = d.feature_dim;
  const Index clouds = B * d.obs_horizon;
  MatrixXd d_feat(F, clouds);
  for (Index b = 0; b < B; ++b)
    for (Index f = 0; f < d.obs_horizon; ++f) d_feat.col(b * d.obs_horizon + f) = d_cond.block(f * F, b, F, 1);
  accumulate(grads->project, d_feat, c.pooled);
  const MatrixXd d_pooled = p.project.W.transpose() * d_feat;

  const Index H = d.point_hidden;
  MatrixXd d_merged = MatrixXd::Zero(H, c.merged.cols());
  for (Index q = 0; q < clouds; ++q)
    for (Index ch = 0; ch < H; ++ch) d_merged(ch, c.argmax[static_cast<std::size_t>(q * H + ch)]) += d_pooled(ch, q);

  const MatrixXd d_v_pre = d_merged.cwiseProduct(c.v_slope);
  accumulate(grads->point2, d_v_pre, c.u);
  MatrixXd d_u = p.point2.W.transpose() * d_v_pre;
  if (p.encoder == EncoderMode::mlp_residual) d_u += d_merged;
  const MatrixXd d_u_pre = d_u.cwiseProduct(c.u_slope);
  accumulate(grads->point1, d_u_pre, batch.points);
}

ConditionedDenoiser::ConditionedDenoiser(const DenoiserParams& params, const NoiseSchedule& schedule,
                                         const Observation& normalized_obs)
    : params_(params), schedule_(schedule) {
  const auto& d = params.dims;
  const DenoiserBatch batch =
      make_batch(params, {normalized_obs}, {Trajectory::Zero(d.horizon, d.action_dim)}, {1});
  ForwardCache cache;
  forward(params, batch, &cache);
  for (std::size_t l = 0; l < params.trunk.size(); ++l) {
    gamma_.push_back(cache.gamma[l].col(0));
    beta_.push_back(cache.beta[l].col(0));
  }
}

VectorXd ConditionedDenoiser::trunk_forward(const VectorXd& x0, std::vector<VectorXd>* pre,
                                            std::vector<VectorXd>* act) const {
  VectorXd x = x0;
  for (std::size_t l = 0; l < params_.trunk.size(); ++l) {
    VectorXd z = params_.trunk[l].W * x + params_.trunk[l].b;
    VectorXd h = silu(z);
    x = gamma_[l].cwiseProduct(h) + beta_[l];
    if (pre) pre->push_back(std::move(z));
    if (act) act->push_back(std::move(h));
  }
  return params_.head.W * x + params_.head.b;
}

Trajectory ConditionedDenoiser::predict_raw(const Trajectory& Ak, int k) const {
  const auto& d = params_.dims;
  if (Ak.rows() != d.horizon || Ak.cols() != d.action_dim) throw ParameterError("trajectory shape mismatch");
  if (k < 1 || k > schedule_.K) throw ParameterError("step index outside schedule");
  VectorXd x0(d.trunk_input());
  x0.head(d.traj_size()) = flatten(Ak);
  x0.tail(d.time_embed_dim) = timestep_embedding(k, d.time_embed_dim);
  return unflatten(trunk_forward(x0, nullptr, nullptr), d.horizon, d.action_dim);
}

Trajectory ConditionedDenoiser::predict_noise(const Trajectory& Ak, int k) const {
  Trajectory out = predict_raw(Ak, k);
  if (params_.prediction == PredictionType::sample) return implied_noise(schedule_, Ak, out, k);
  return out;
}

Trajectory ConditionedDenoiser::noise_vjp(const Trajectory& Ak, int k, const Trajectory& cotangent) const {
  const auto& d = params_.dims;
  if (Ak.rows() != d.horizon || Ak.cols() != d.action_dim || cotangent.rows() != d.horizon ||
      cotangent.cols() != d.action_dim)
    throw ParameterError("vjp: trajectory shape mismatch");
  if (k < 1 || k > schedule_.K) throw ParameterError("step index outside schedule");
  VectorXd x0(d.trunk_input());
  x0.head(d.traj_size()) = flatten(Ak);
  x0.tail(d.time_embed_dim) = timestep_embedding(k, d.time_embed_dim);
  std::vector<VectorXd> pre, act;
  trunk_forward(x0, &pre, &act);

  VectorXd dx = params_.head.W.transpose() * flatten(cotangent);
  for (std::size_t li = params_.trunk.size(); li-- > 0;) {
    const VectorXd d_pre = dx.cwiseProduct(gamma_[li]).cwiseProduct(silu_grad(pre[li]));
    dx = params_.trunk[li].W.transpose() * d_pre;
  }
  Trajectory net_vjp = unflatten(dx.head(d.traj_size()), d.horizon, d.action_dim);
  if (params_.prediction == PredictionType::sample) {
    const double ab = schedule_.alpha_bar_at(k);
    return (cotangent - std::sqrt(ab) * net_vjp) / std::sqrt(1.0 - ab);
  }
  return net_vjp;
}

Trajectory predict_noise(const DenoiserParams& params, const NoiseSchedule& schedule, const Trajectory& Ak, int k,
                         const Observation& normalized_obs) {
  return ConditionedDenoiser(params, schedule, normalized_obs).predict_noise(Ak, k);
}

Trajectory denoiser_vjp(const DenoiserParams& params, const NoiseSchedule& schedule, const Trajectory& Ak, int k,
                        const Observation& normalized_obs, const Trajectory& cotangent) {
  return ConditionedDenoiser(params, schedule, normalized_obs).noise_vjp(Ak, k, cotangent);
}

}  // namespace lo3d
