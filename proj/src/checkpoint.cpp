#include "lo3d/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "lo3d/errors.hpp"

namespace lo3d {

namespace {

void write_minmax(detail::BinaryWriter& w, const MinMax& m, int dim) {
  if (m.dim() != dim) throw ParameterError("normalization stats do not match the network dimensions");
  for (Eigen::Index i = 0; i < m.dim(); ++i) w.f64(m.min[i]);
  for (Eigen::Index i = 0; i < m.dim(); ++i) w.f64(m.max[i]);
}

MinMax read_minmax(detail::BinaryReader& r, int dim) {
  MinMax m;
  m.min.resize(dim);
  m.max.resize(dim);
  for (int i = 0; i < dim; ++i) m.min[i] = r.f64();
  for (int i = 0; i < dim; ++i) m.max[i] = r.f64();
  return m;
}

std::uint32_t checked_u32(int v) {
  if (v < 0) throw ParameterError("negative dimension in checkpoint");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, std::ostream& os) {
  const auto& p = ckpt.params;
  const auto& d = p.dims;
  d.validate();
  detail::BinaryWriter w(os);
  w.bytes("LO3D", 4);
  w.u32(kCheckpointVersion);
  w.bytes("CKPT", 4);
  w.u8(static_cast<std::uint8_t>(p.prediction));
  w.u8(static_cast<std::uint8_t>(p.encoder));
  for (int v : {d.horizon, d.action_dim, d.point_dim, d.state_dim, d.obs_horizon, d.num_points, d.point_hidden,
                d.feature_dim, d.time_embed_dim})
    w.u32(checked_u32(v));
  w.u32(checked_u32(static_cast<int>(d.trunk_hidden.size())));
  for (int h : d.trunk_hidden) w.u32(checked_u32(h));
  w.u32(checked_u32(ckpt.schedule.K));
  w.f64(ckpt.schedule.beta_start);
  w.f64(ckpt.schedule.beta_end);
  write_minmax(w, ckpt.stats.action, d.action_dim);
  write_minmax(w, ckpt.stats.state, d.state_dim);
  write_minmax(w, ckpt.stats.cloud, d.point_dim);
  w.u64(p.parameter_count());
  p.for_each_layer([&](const Linear& l) {
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) w.f64(l.W(i, j));
    for (Eigen::Index i = 0; i < l.b.size(); ++i) w.f64(l.b[i]);
  });
  if (!os) throw DataError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& is) {
  detail::BinaryReader r(is, "checkpoint");
  r.expect_tag("LO3D", "magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: format version " + std::to_string(version) + " is not supported (this build reads " +
                      std::to_string(kCheckpointVersion) + "); retrain or convert the checkpoint");
  r.expect_tag("CKPT", "content tag");
  const std::uint8_t pred = r.u8();
  const std::uint8_t enc = r.u8();
  if (pred > 1) throw FormatError("checkpoint: unknown prediction type " + std::to_string(pred));
  if (enc > 1) throw FormatError("checkpoint: unknown encoder mode " + std::to_string(enc));

  DenoiserDims d;
  for (int* f : {&d.horizon, &d.action_dim, &d.point_dim, &d.state_dim, &d.obs_horizon, &d.num_points,
                 &d.point_hidden, &d.feature_dim, &d.time_embed_dim})
    *f = static_cast<int>(r.u32());
  const std::uint32_t layers = r.u32();
  if (layers > 64) throw FormatError("checkpoint: implausible trunk depth " + std::to_string(layers));
  d.trunk_hidden.resize(layers);
  for (auto& h : d.trunk_hidden) h = static_cast<int>(r.u32());
  try {
    d.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("checkpoint: invalid dimensions: ") + e.what());
  }

  Checkpoint c;
  c.schedule.K = static_cast<int>(r.u32());
  c.schedule.beta_start = r.f64();
  c.schedule.beta_end = r.f64();
  c.stats.action = read_minmax(r, d.action_dim);
  c.stats.state = read_minmax(r, d.state_dim);
  c.stats.cloud = read_minmax(r, d.point_dim);

  c.params = init_denoiser(d, static_cast<PredictionType>(pred), static_cast<EncoderMode>(enc), 0);
  const std::uint64_t count = r.u64();
  if (count != c.params.parameter_count())
    throw FormatError("checkpoint: parameter count " + std::to_string(count) + " does not match the declared layers");
  c.params.for_each_layer([&](Linear& l) {
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) l.W(i, j) = r.f64();
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = r.f64();
  });
  return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(ckpt, os);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace lo3d
