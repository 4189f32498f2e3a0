#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "partforge/vec.hpp"

namespace partforge {

// Exact nearest-neighbour index over a fixed point set.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  struct Neighbor {
    std::uint32_t index = 0;
    double squared_distance = 0.0;
  };
  // Ties resolve to the lowest point index. Precondition: non-empty tree.
  Neighbor nearest(Vec3 q) const;

  std::size_t size() const { return ids_.size(); }
  // Point indices in leaf order; neighbouring entries are spatially close.
  std::span<const std::uint32_t> leaf_order() const { return ids_; }

 private:
  static constexpr std::uint32_t kLeafSize = 8;
  struct Node {
    Aabb box;
    std::uint32_t begin = 0;  // range into ids_
    std::uint32_t end = 0;
    std::uint32_t left = UINT32_MAX;
    std::uint32_t right = UINT32_MAX;
  };
  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, Vec3 q, Neighbor& best) const;

  std::vector<Vec3> points_;  // in ids_ order after construction
  std::vector<std::uint32_t> ids_;
  std::vector<Node> nodes_;
  std::uint32_t root_ = UINT32_MAX;
};

}  // namespace partforge
