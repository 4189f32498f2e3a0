#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "partforge/asset.hpp"
#include "partforge/vec.hpp"

namespace partforge {

// Closest point on triangle (a, b, c) to p, by Voronoi-region classification.
Vec3 closest_point_on_triangle(Vec3 p, Vec3 a, Vec3 b, Vec3 c);

struct ClosestHit {
  double squared_distance = std::numeric_limits<double>::infinity();
  Vec3 point;
  std::uint32_t face = 0;
};

// Static bounding volume hierarchy over the triangles of a mesh. Queries are
// const and safe to run concurrently.
class TriangleBvh {
 public:
  explicit TriangleBvh(const Mesh& mesh, int leaf_size = 4);

  ClosestHit closest(Vec3 p) const;
  double distance(Vec3 p) const;

  // True if the ray origin + t*dir hits any triangle for t in (t_min, t_max).
  bool occluded(Vec3 origin, Vec3 dir, double t_min, double t_max) const;

  std::size_t triangle_count() const { return tris_.size(); }

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first triangle; inner: right child
    std::uint32_t count = 0;  // 0 for inner nodes
  };
  struct Tri {
    Vec3 a, b, c;
    std::uint32_t face;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids, int leaf_size);

  std::vector<Node> nodes_;
  std::vector<Tri> tris_;
};

}  // namespace partforge
