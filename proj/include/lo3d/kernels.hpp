#pragma once

// Data-parallel kernels. Every OpenMP kernel has a serial twin with the same
// contract; tests hold them to bit-identical results and bench/ compares speed.

#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lo3d::kernels {

struct PointHit {
  double squared_distance;
  std::size_t index;  // flattened position over all clouds, row-major by cloud
};

std::optional<PointHit> nearest_point_serial(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& query);
std::optional<PointHit> nearest_point_parallel(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& query);

std::optional<Eigen::VectorXd> closest_point_serial(std::span<const Eigen::MatrixXd> clouds,
                                                    const Eigen::VectorXd& query);
std::optional<Eigen::VectorXd> closest_point_parallel(std::span<const Eigen::MatrixXd> clouds,
                                                      const Eigen::VectorXd& query);

/// Point-to-segment distance.
double segment_point_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& p);

/// min over cloud points of the distance to segment [a, b]; +inf for no points.
double segment_cloud_distance_serial(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& a,
                                     const Eigen::VectorXd& b);
double segment_cloud_distance_parallel(std::span<const Eigen::MatrixXd> clouds, const Eigen::VectorXd& a,
                                       const Eigen::VectorXd& b);

/// Evaluates f(0..n-1) and returns results in index order. f must be
/// independent per index (own rng, no shared mutation).
template <class F>
auto map_serial(std::size_t n, F&& f) {
  using T = decltype(f(std::size_t{0}));
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(f(i));
  return out;
}

template <class F>
auto map_parallel(std::size_t n, F&& f) {
  using T = decltype(f(std::size_t{0}));
  std::vector<std::optional<T>> slots(n);
  std::exception_ptr error;
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      slots[static_cast<std::size_t>(i)].emplace(f(static_cast<std::size_t>(i)));
    } catch (...) {
#pragma omp critical(lo3d_map_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

int max_threads();

}  // namespace lo3d::kernels
