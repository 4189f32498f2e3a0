#include <omp.h>

#include <limits>

#include "partforge/errors.hpp"
#include "partforge/geometry.hpp"

namespace partforge {

namespace {

struct Best {
  double value = -std::numeric_limits<double>::infinity();
  std::uint32_t index = UINT32_MAX;

  void offer(double v, std::uint32_t i) {
    if (v > value || (v == value && i < index)) {
      value = v;
      index = i;
    }
  }
};

std::uint32_t start_index(std::span<const Vec3> points, StartRule start) {
  if (start == StartRule::FirstIndex) return 0;
  Vec3 centroid;
  for (const auto& p : points) centroid += p;
  centroid = centroid / static_cast<double>(points.size());
  Best best;
  for (std::uint32_t i = 0; i < points.size(); ++i) best.offer(squared_distance(points[i], centroid), i);
  return best.index;
}

void check_k(std::span<const Vec3> points, std::size_t k) {
  if (k < 1 || k > points.size()) {
    throw InvalidArgument("farthest_point_sample needs 1 <= k <= point count (k=" + std::to_string(k) +
                          ", n=" + std::to_string(points.size()) + ")");
  }
}

}  // namespace

// Selected points carry distance -1 so they never win again; squared
// distances order identically to distances.
std::vector<std::uint32_t> farthest_point_sample(std::span<const Vec3> points, std::size_t k, StartRule start) {
  check_k(points, k);
  const auto n = static_cast<std::ptrdiff_t>(points.size());
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> out;
  out.reserve(k);
  std::uint32_t current = start_index(points, start);
  for (std::size_t step = 0;; ++step) {
    out.push_back(current);
    dist[current] = -1.0;
    if (step + 1 == k) break;
    const Vec3 c = points[current];
    Best best;
#pragma omp parallel
    {
      Best local;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (dist[i] < 0.0) continue;
        const double d = squared_distance(points[i], c);
        if (d < dist[i]) dist[i] = d;
        local.offer(dist[i], static_cast<std::uint32_t>(i));
      }
#pragma omp critical(partforge_fps)
      best.offer(local.value, local.index);
    }
    current = best.index;
  }
  return out;
}

std::vector<std::uint32_t> farthest_point_sample(const PointCloud& pc, std::size_t k, StartRule start) {
  return farthest_point_sample(std::span<const Vec3>(pc.points), k, start);
}

namespace reference {

std::vector<std::uint32_t> farthest_point_sample(std::span<const Vec3> points, std::size_t k, StartRule start) {
  check_k(points, k);
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> out;
  out.reserve(k);
  std::uint32_t current = start_index(points, start);
  for (std::size_t step = 0;; ++step) {
    out.push_back(current);
    dist[current] = -1.0;
    if (step + 1 == k) break;
    Best best;
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      if (dist[i] < 0.0) continue;
      dist[i] = std::min(dist[i], squared_distance(points[i], points[current]));
      best.offer(dist[i], i);
    }
    current = best.index;
  }
  return out;
}

}  // namespace reference

}  // namespace partforge
