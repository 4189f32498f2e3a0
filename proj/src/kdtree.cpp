#include "partforge/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace partforge {

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()), ids_(points_.size()) {
  std::iota(ids_.begin(), ids_.end(), 0u);
  nodes_.reserve(2 * (points_.size() / kLeafSize + 1));
  if (!ids_.empty()) root_ = build(0, static_cast<std::uint32_t>(ids_.size()));
  std::vector<Vec3> ordered(points_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) ordered[i] = points_[ids_[i]];
  points_ = std::move(ordered);
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  for (auto i = begin; i < end; ++i) node.box.expand(points_[ids_[i]]);
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return index;
  const int axis = node.box.longest_axis();
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end, [&](std::uint32_t a, std::uint32_t b) {
    if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
    return a < b;
  });
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

void KdTree::search(std::uint32_t node_index, Vec3 q, Neighbor& best) const {
  const auto& node = nodes_[node_index];
  if (node.left == UINT32_MAX) {
    for (auto i = node.begin; i < node.end; ++i) {
      const auto id = ids_[i];
      const double d2 = squared_distance(points_[i], q);
      if (d2 < best.squared_distance || (d2 == best.squared_distance && id < best.index)) best = {id, d2};
    }
    return;
  }
  const double dl = nodes_[node.left].box.squared_distance_to(q);
  const double dr = nodes_[node.right].box.squared_distance_to(q);
  const bool left_first = dl <= dr;
  const auto near = left_first ? node.left : node.right;
  const auto far = left_first ? node.right : node.left;
  // <= keeps equal-distance candidates reachable for the lowest-index tie rule.
  if ((left_first ? dl : dr) <= best.squared_distance) search(near, q, best);
  if ((left_first ? dr : dl) <= best.squared_distance) search(far, q, best);
}

KdTree::Neighbor KdTree::nearest(Vec3 q) const {
  Neighbor best{UINT32_MAX, std::numeric_limits<double>::infinity()};
  if (root_ != UINT32_MAX) search(root_, q, best);
  return best;
}

}  // namespace partforge
