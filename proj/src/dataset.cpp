#include "lo3d/dataset.hpp"

#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "lo3d/errors.hpp"

namespace lo3d {

namespace {

void fit(MinMax& m, const std::vector<float>& values, std::size_t dim) {
  m.min = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), std::numeric_limits<double>::infinity());
  m.max = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i % dim);
    m.min[j] = std::min(m.min[j], static_cast<double>(values[i]));
    m.max[j] = std::max(m.max[j], static_cast<double>(values[i]));
  }
}

void write_minmax(detail::BinaryWriter& w, const MinMax& m, std::uint32_t dim) {
  if (m.dim() != dim) throw ParameterError("normalization stats do not match dataset dimensions");
  for (Eigen::Index i = 0; i < m.dim(); ++i) w.f32(static_cast<float>(m.min[i]));
  for (Eigen::Index i = 0; i < m.dim(); ++i) w.f32(static_cast<float>(m.max[i]));
}

MinMax read_minmax(detail::BinaryReader& r, std::uint32_t dim) {
  MinMax m;
  m.min.resize(dim);
  m.max.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) m.min[i] = r.f32();
  for (std::uint32_t i = 0; i < dim; ++i) m.max[i] = r.f32();
  return m;
}

}  // namespace

NormalizationStats compute_stats(const DemoDataset& data) {
  std::vector<float> actions, states, clouds;
  for (const auto& e : data.episodes) {
    actions.insert(actions.end(), e.actions.begin(), e.actions.end());
    states.insert(states.end(), e.states.begin(), e.states.end());
    clouds.insert(clouds.end(), e.clouds.begin(), e.clouds.end());
  }
  NormalizationStats s;
  fit(s.action, actions, data.action_dim);
  fit(s.state, states, data.state_dim);
  fit(s.cloud, clouds, data.point_dim);
  return s;
}

// Layout (little endian):
//   "LO3D" u32 version "DEMO"
//   u32 point_dim, num_points, state_dim, action_dim
//   u32 task, horizon, executed, obs_horizon; u64 scene_spec_hash, collect_seed
//   stats as f32: action min[], action max[], state min[], state max[], cloud min[], cloud max[]
//   u32 episode_count
//   index table, per episode: u64 scene_seed, u32 steps, u64 payload offset from file start
//   payloads, per episode: f32 clouds[steps*P*d], states[steps*S], actions[steps*A]
void write_dataset(const DemoDataset& data, std::ostream& os) {
  detail::BinaryWriter w(os);
  w.bytes("LO3D", 4);
  w.u32(kDatasetVersion);
  w.bytes("DEMO", 4);
  w.u32(data.point_dim);
  w.u32(data.num_points);
  w.u32(data.state_dim);
  w.u32(data.action_dim);
  w.u32(data.meta.task);
  w.u32(data.meta.horizon);
  w.u32(data.meta.executed);
  w.u32(data.meta.obs_horizon);
  w.u64(data.meta.scene_spec_hash);
  w.u64(data.meta.collect_seed);
  const bool empty_stats = data.episodes.empty() && data.stats.action.dim() == 0;
  if (empty_stats) {
    NormalizationStats zero;
    zero.action = {Eigen::VectorXd::Zero(data.action_dim), Eigen::VectorXd::Zero(data.action_dim)};
    zero.state = {Eigen::VectorXd::Zero(data.state_dim), Eigen::VectorXd::Zero(data.state_dim)};
    zero.cloud = {Eigen::VectorXd::Zero(data.point_dim), Eigen::VectorXd::Zero(data.point_dim)};
    write_minmax(w, zero.action, data.action_dim);
    write_minmax(w, zero.state, data.state_dim);
    write_minmax(w, zero.cloud, data.point_dim);
  } else {
    write_minmax(w, data.stats.action, data.action_dim);
    write_minmax(w, data.stats.state, data.state_dim);
    write_minmax(w, data.stats.cloud, data.point_dim);
  }
  w.u32(static_cast<std::uint32_t>(data.episodes.size()));

  const std::uint64_t table_entry = 8 + 4 + 8;
  std::uint64_t offset = w.offset() + table_entry * data.episodes.size();
  for (const auto& e : data.episodes) {
    const std::size_t expect_c = std::size_t{e.steps} * data.num_points * data.point_dim;
    if (e.clouds.size() != expect_c || e.states.size() != std::size_t{e.steps} * data.state_dim ||
        e.actions.size() != std::size_t{e.steps} * data.action_dim)
      throw DataError("episode arrays do not match their step count");
    w.u64(e.scene_seed);
    w.u32(e.steps);
    w.u64(offset);
    offset += 4 * (e.clouds.size() + e.states.size() + e.actions.size());
  }
  for (const auto& e : data.episodes) {
    for (float v : e.clouds) w.f32(v);
    for (float v : e.states) w.f32(v);
    for (float v : e.actions) w.f32(v);
  }
  if (!os) throw DataError("dataset write failed");
}

DemoDataset read_dataset(std::istream& is) {
  detail::BinaryReader r(is, "dataset");
  r.expect_tag("LO3D", "magic");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw FormatError("dataset: format version " + std::to_string(version) + " is not readable by this build (expects " +
                      std::to_string(kDatasetVersion) + "); re-run `collect` or migrate the file");
  r.expect_tag("DEMO", "content tag");
  DemoDataset d;
  d.point_dim = r.u32();
  d.num_points = r.u32();
  d.state_dim = r.u32();
  d.action_dim = r.u32();
  if (d.point_dim == 0 || d.point_dim > 3 || d.action_dim == 0 || d.num_points == 0)
    throw FormatError("dataset: implausible dimensions in header");
  d.meta.task = r.u32();
  d.meta.horizon = r.u32();
  d.meta.executed = r.u32();
  d.meta.obs_horizon = r.u32();
  d.meta.scene_spec_hash = r.u64();
  d.meta.collect_seed = r.u64();
  d.stats.action = read_minmax(r, d.action_dim);
  d.stats.state = read_minmax(r, d.state_dim);
  d.stats.cloud = read_minmax(r, d.point_dim);
  const std::uint32_t count = r.u32();
  struct Entry {
    std::uint64_t seed;
    std::uint32_t steps;
    std::uint64_t offset;
  };
  std::vector<Entry> table;
  table.reserve(std::min<std::uint32_t>(count, 1u << 20));
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.seed = r.u64();
    e.steps = r.u32();
    e.offset = r.u64();
    table.push_back(e);
  }
  for (const auto& t : table) {
    if (t.offset != r.offset())
      throw FormatError("dataset: episode payload expected at byte offset " + std::to_string(t.offset) +
                        " but stream is at " + std::to_string(r.offset()));
    DemoEpisode e;
    e.scene_seed = t.seed;
    e.steps = t.steps;
    e.clouds.resize(std::size_t{t.steps} * d.num_points * d.point_dim);
    e.states.resize(std::size_t{t.steps} * d.state_dim);
    e.actions.resize(std::size_t{t.steps} * d.action_dim);
    for (auto& v : e.clouds) v = r.f32();
    for (auto& v : e.states) v = r.f32();
    for (auto& v : e.actions) v = r.f32();
    d.episodes.push_back(std::move(e));
  }
  if (d.episodes.empty()) d.stats = {};
  return d;
}

void write_dataset(const DemoDataset& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_dataset(data, os);
}

DemoDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open dataset " + path.string());
  return read_dataset(is);
}

}  // namespace lo3d
