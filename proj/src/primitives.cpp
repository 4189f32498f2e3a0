#include "partforge/primitives.hpp"

#include <numbers>

namespace partforge {

Mesh make_box(Vec3 lo, Vec3 hi) {
  Mesh m;
  for (int c = 0; c < 8; ++c) {
    m.vertices.push_back({(c & 1) ? hi.x : lo.x, (c & 2) ? hi.y : lo.y, (c & 4) ? hi.z : lo.z});
  }
  // Two triangles per face, counter-clockwise seen from outside.
  m.faces = {{0, 2, 3}, {0, 3, 1},   // -z
             {4, 5, 7}, {4, 7, 6},   // +z
             {0, 1, 5}, {0, 5, 4},   // -y
             {2, 6, 7}, {2, 7, 3},   // +y
             {0, 4, 6}, {0, 6, 2},   // -x
             {1, 3, 7}, {1, 7, 5}};  // +x
  return m;
}

Mesh make_uv_sphere(Vec3 center, double radius, int segments, int rings) {
  Mesh m;
  const double pi = std::numbers::pi;
  m.vertices.push_back(center + Vec3{0, radius, 0});
  for (int r = 1; r < rings; ++r) {
    const double theta = pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * pi * s / segments;
      m.vertices.push_back(center + Vec3{radius * std::sin(theta) * std::cos(phi), radius * std::cos(theta),
                                         radius * std::sin(theta) * std::sin(phi)});
    }
  }
  const auto bottom = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.push_back(center + Vec3{0, -radius, 0});
  auto ring_vertex = [&](int r, int s) { return static_cast<std::uint32_t>(1 + (r - 1) * segments + (s % segments)); };
  for (int s = 0; s < segments; ++s) m.faces.push_back({0, ring_vertex(1, s + 1), ring_vertex(1, s)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const auto a = ring_vertex(r, s), b = ring_vertex(r, s + 1), c = ring_vertex(r + 1, s + 1),
                 d = ring_vertex(r + 1, s);
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
    }
  }
  for (int s = 0; s < segments; ++s) m.faces.push_back({bottom, ring_vertex(rings - 1, s), ring_vertex(rings - 1, s + 1)});
  return m;
}

namespace {

// Maps local (u, v, axial) to world with the axial direction along `axis`.
Vec3 axis_point(int axis, double u, double v, double h) {
  switch (axis) {
    case 0: return {h, u, v};
    case 1: return {v, h, u};
    default: return {u, v, h};
  }
}

}  // namespace

Mesh make_cylinder(Vec3 center, double radius, double height, int axis, int segments) {
  Mesh m;
  const double pi = std::numbers::pi;
  for (int side = 0; side < 2; ++side) {
    const double h = (side == 0 ? -0.5 : 0.5) * height;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * pi * s / segments;
      m.vertices.push_back(center + axis_point(axis, radius * std::cos(phi), radius * std::sin(phi), h));
    }
  }
  const auto c0 = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.push_back(center + axis_point(axis, 0, 0, -0.5 * height));
  m.vertices.push_back(center + axis_point(axis, 0, 0, 0.5 * height));
  const auto n = static_cast<std::uint32_t>(segments);
  for (std::uint32_t s = 0; s < n; ++s) {
    const std::uint32_t a = s, b = (s + 1) % n, c = n + (s + 1) % n, d = n + s;
    m.faces.push_back({a, b, c});
    m.faces.push_back({a, c, d});
    m.faces.push_back({c0, b, a});
    m.faces.push_back({c0 + 1, d, c});
  }
  return m;
}

Mesh make_open_cone(Vec3 base_center, double radius, double height, int segments) {
  Mesh m;
  const double pi = std::numbers::pi;
  for (int s = 0; s < segments; ++s) {
    const double phi = 2.0 * pi * s / segments;
    m.vertices.push_back(base_center + Vec3{radius * std::cos(phi), 0.0, radius * std::sin(phi)});
  }
  const auto apex = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.push_back(base_center + Vec3{0.0, height, 0.0});
  const auto n = static_cast<std::uint32_t>(segments);
  for (std::uint32_t s = 0; s < n; ++s) m.faces.push_back({s, apex, (s + 1) % n});
  return m;
}

Mesh make_quad(Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
  Mesh m;
  m.vertices = {a, b, c, d};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

Mesh translated(Mesh m, Vec3 offset) {
  for (auto& v : m.vertices) v += offset;
  return m;
}

}  // namespace partforge
