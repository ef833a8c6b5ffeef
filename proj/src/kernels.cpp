#include "lo3d/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <limits>

#include "lo3d/errors.hpp"

namespace lo3d::kernels {

namespace {

struct FlatCloud {
  std::vector<const Eigen::MatrixXd*> clouds;
  std::vector<std::size_t> offsets;  // prefix sums of row counts
  std::size_t total = 0;
};

FlatCloud flatten_clouds(std::span<const Eigen::MatrixXd> clouds, Eigen::Index dim) {
  FlatCloud f;
  for (const auto& c : clouds) {
    if (c.rows() == 0) continue;
    if (c.cols() != dim) throw ParameterError("cloud dimension does not match query");
    f.clouds.push_back(&c);
    f.offsets.push_back(f.total);
    f.total += static_cast<std::size_t>(c.rows());
  }
  return f;
}

double squared_distance(const Eigen::MatrixXd& c, Eigen::Index row, const Eigen::VectorXd& q) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    const double d = c(row, j) - q[j];
    s += d * d;
  }
  return s;
}

bool better(const PointHit& a, const PointHit& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}

Eigen::VectorXd point_at(std::span<const Eigen::MatrixXd> clouds, std::size_t index) {
  for (const auto& c : clouds) {
    const auto rows = static_cast<std::size_t>(c.rows());
    if (index < rows) return c.row(static_cast<Eigen::Index>(index)).transpose();
    index -= rows;
  }
  throw ParameterError("point index out of range");
}

}  // namespace

std::optional<PointHit> nearest_point_serial(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& query) {
  std::optional<PointHit> best;
  std::size_t index = 0;
  for (const auto& c : clouds) {
    if (c.rows() > 0 && c.cols() != query.size()) throw ParameterError("cloud dimension does not match query");
    for (Eigen::Index r = 0; r < c.rows(); ++r, ++index) {
      const PointHit h{squared_distance(c, r, query), index};
      if (!best || h.squared_distance < best->squared_distance) best = h;
    }
  }
  return best;
}

std::optional<PointHit> nearest_point_parallel(std::span<const Eigen::MatrixXd> clouds,
                                               const Eigen::VectorXd& query) {
  const FlatCloud flat = flatten_clouds(clouds, query.size());
  if (flat.total == 0) return std::nullopt;
  PointHit best{std::numeric_limits<double>::infinity(), flat.total};
#pragma omp parallel
  {
    PointHit local{std::numeric_limits<double>::infinity(), flat.total};
    for (std::size_t ci = 0; ci < flat.clouds.size(); ++ci) {
      const auto& c = *flat.clouds[ci];
      const std::size_t off = flat.offsets[ci];
      const long long rows = static_cast<long long>(c.rows());
#pragma omp for schedule(static) nowait
      for (long long r = 0; r < rows; ++r) {
        const PointHit h{squared_distance(c, r, query), off + static_cast<std::size_t>(r)};
        if (better(h, local)) local = h;
      }
    }
#pragma omp critical(lo3d_nearest_point)
    if (better(local, best)) best = local;
  }
  return best;
}

std::optional<Eigen::VectorXd> closest_point_serial(std::span<const Eigen::MatrixXd> clouds,
                                                    const Eigen::VectorXd& query) {
  const auto hit = nearest_point_serial(clouds, query);
  if (!hit) return std::nullopt;
  return point_at(clouds, hit->index);
}

std::optional<Eigen::VectorXd> closest_point_parallel(std::span<const Eigen::MatrixXd> clouds,
                                                      const Eigen::VectorXd& query) {
  const auto hit = nearest_point_parallel(clouds, query);
  if (!hit) return std::nullopt;
  return point_at(clouds, hit->index);
}

namespace {

// Distance from row r of c to the segment a + t * ab, t in [0, 1].
double segment_row_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& ab, double len2, const Eigen::MatrixXd& c,
                            Eigen::Index r) {
  double dot = 0.0;
  for (Eigen::Index i = 0; i < ab.size(); ++i) dot += (c(r, i) - a[i]) * ab[i];
  const double t = len2 > 0.0 ? std::clamp(dot / len2, 0.0, 1.0) : 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < ab.size(); ++i) {
    const double d = a[i] + t * ab[i] - c(r, i);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double segment_point_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& p) {
  const Eigen::VectorXd ab = b - a;
  const Eigen::MatrixXd row = p.transpose();
  return segment_row_distance(a, ab, ab.squaredNorm(), row, 0);
}

double segment_cloud_distance_serial(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& a,
                                     const Eigen::VectorXd& b) {
  if (b.size() != a.size()) throw ParameterError("segment endpoints differ in dimension");
  const FlatCloud flat = flatten_clouds(clouds, a.size());
  const Eigen::VectorXd ab = b - a;
  const double len2 = ab.squaredNorm();
  double best = std::numeric_limits<double>::infinity();
  for (const auto* cp : flat.clouds)
    for (Eigen::Index r = 0; r < cp->rows(); ++r) best = std::min(best, segment_row_distance(a, ab, len2, *cp, r));
  return best;
}

double segment_cloud_distance_parallel(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& a,
                                       const Eigen::VectorXd& b) {
  if (b.size() != a.size()) throw ParameterError("segment endpoints differ in dimension");
  const FlatCloud flat = flatten_clouds(clouds, a.size());
  const Eigen::VectorXd ab = b - a;
  const double len2 = ab.squaredNorm();
  double best = std::numeric_limits<double>::infinity();
#pragma omp parallel reduction(min : best)
  for (std::size_t ci = 0; ci < flat.clouds.size(); ++ci) {
    const auto& c = *flat.clouds[ci];
    const long long rows = static_cast<long long>(c.rows());
#pragma omp for schedule(static) nowait
    for (long long r = 0; r < rows; ++r) best = std::min(best, segment_row_distance(a, ab, len2, c, r));
  }
  return best;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace lo3d::kernels
