#include "partforge/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace partforge {

Vec3 closest_point_on_triangle(Vec3 p, Vec3 a, Vec3 b, Vec3 c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  }
  const double denom = va + vb + vc;
  if (denom == 0.0) {
    // Degenerate triangle: fall back to the closest of its edges.
    auto seg = [&](Vec3 s0, Vec3 s1) {
      const Vec3 d = s1 - s0;
      const double len2 = squared_norm(d);
      double t = len2 > 0.0 ? dot(p - s0, d) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      return s0 + d * t;
    };
    Vec3 best = seg(a, b);
    for (Vec3 q : {seg(b, c), seg(c, a)}) {
      if (squared_distance(p, q) < squared_distance(p, best)) best = q;
    }
    return best;
  }
  const double v = vb / denom, w = vc / denom;
  return a + ab * v + ac * w;
}

TriangleBvh::TriangleBvh(const Mesh& mesh, int leaf_size) {
  tris_.reserve(mesh.faces.size());
  std::vector<Vec3> centroids;
  centroids.reserve(mesh.faces.size());
  for (std::uint32_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    Tri t{mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]], i};
    centroids.push_back((t.a + t.b + t.c) / 3.0);
    tris_.push_back(t);
  }
  nodes_.reserve(2 * tris_.size() / std::max(leaf_size, 1) + 1);
  if (!tris_.empty()) build(0, static_cast<std::uint32_t>(tris_.size()), centroids, std::max(leaf_size, 1));
}

std::uint32_t TriangleBvh::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids,
                                 int leaf_size) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, cbox;
  for (auto i = begin; i < end; ++i) {
    box.expand(tris_[i].a);
    box.expand(tris_[i].b);
    box.expand(tris_[i].c);
    cbox.expand(centroids[i]);
  }
  nodes_[index].box = box;
  if (end - begin <= static_cast<std::uint32_t>(leaf_size)) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  const int axis = cbox.longest_axis();
  const auto mid = begin + (end - begin) / 2;
  // Median split on centroids; permute triangles and centroids together.
  std::vector<std::uint32_t> order(end - begin);
  std::iota(order.begin(), order.end(), begin);
  std::nth_element(order.begin(), order.begin() + (mid - begin), order.end(),
                   [&](std::uint32_t l, std::uint32_t r) {
                     if (centroids[l][axis] != centroids[r][axis]) return centroids[l][axis] < centroids[r][axis];
                     return l < r;
                   });
  std::vector<Tri> tmp_t;
  std::vector<Vec3> tmp_c;
  tmp_t.reserve(order.size());
  tmp_c.reserve(order.size());
  for (auto o : order) {
    tmp_t.push_back(tris_[o]);
    tmp_c.push_back(centroids[o]);
  }
  std::copy(tmp_t.begin(), tmp_t.end(), tris_.begin() + begin);
  std::copy(tmp_c.begin(), tmp_c.end(), centroids.begin() + begin);

  build(begin, mid, centroids, leaf_size);  // left child is index + 1
  const auto right = build(mid, end, centroids, leaf_size);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

ClosestHit TriangleBvh::closest(Vec3 p) const {
  ClosestHit best;
  if (nodes_.empty()) return best;
  std::uint32_t stack[128];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const auto& node = nodes_[stack[--sp]];
    if (node.box.squared_distance_to(p) >= best.squared_distance) continue;
    if (node.count > 0) {
      for (auto i = node.first; i < node.first + node.count; ++i) {
        const auto& t = tris_[i];
        const Vec3 q = closest_point_on_triangle(p, t.a, t.b, t.c);
        const double d2 = squared_distance(p, q);
        if (d2 < best.squared_distance || (d2 == best.squared_distance && t.face < best.face)) {
          best = {d2, q, t.face};
        }
      }
      continue;
    }
    const auto left = static_cast<std::uint32_t>(&node - nodes_.data()) + 1;
    const auto right = node.first;
    const double dl = nodes_[left].box.squared_distance_to(p);
    const double dr = nodes_[right].box.squared_distance_to(p);
    // Visit the nearer child first.
    if (dl <= dr) {
      stack[sp++] = right;
      stack[sp++] = left;
    } else {
      stack[sp++] = left;
      stack[sp++] = right;
    }
  }
  return best;
}

double TriangleBvh::distance(Vec3 p) const { return std::sqrt(closest(p).squared_distance); }

namespace {

bool ray_box(const Aabb& box, Vec3 origin, Vec3 inv_dir, double t_min, double t_max) {
  for (int i = 0; i < 3; ++i) {
    double t0 = (box.lo[i] - origin[i]) * inv_dir[i];
    double t1 = (box.hi[i] - origin[i]) * inv_dir[i];
    if (t0 > t1) std::swap(t0, t1);
    // NaN from 0*inf keeps the slab unconstrained.
    if (t0 > t_min) t_min = t0;
    if (t1 < t_max) t_max = t1;
    if (t_max < t_min) return false;
  }
  return true;
}

// Moller-Trumbore.
bool ray_triangle(Vec3 origin, Vec3 dir, Vec3 a, Vec3 b, Vec3 c, double t_min, double t_max) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = cross(dir, e2);
  const double det = dot(e1, pv);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Vec3 tv = origin - a;
  const double u = dot(tv, pv) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qv = cross(tv, e1);
  const double v = dot(dir, qv) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = dot(e2, qv) * inv;
  return t > t_min && t < t_max;
}

}  // namespace

bool TriangleBvh::occluded(Vec3 origin, Vec3 dir, double t_min, double t_max) const {
  if (nodes_.empty()) return false;
  const Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
  std::uint32_t stack[128];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const auto idx = stack[--sp];
    const auto& node = nodes_[idx];
    if (!ray_box(node.box, origin, inv, t_min, t_max)) continue;
    if (node.count > 0) {
      for (auto i = node.first; i < node.first + node.count; ++i) {
        const auto& t = tris_[i];
        if (ray_triangle(origin, dir, t.a, t.b, t.c, t_min, t_max)) return true;
      }
      continue;
    }
    stack[sp++] = node.first;
    stack[sp++] = idx + 1;
  }
  return false;
}

}  // namespace partforge
