#pragma once

#include "partforge/asset.hpp"

namespace partforge {

// Closed, outward-wound primitives used by fixtures, tests and benchmarks.
Mesh make_box(Vec3 lo, Vec3 hi);
Mesh make_uv_sphere(Vec3 center, double radius, int segments = 48, int rings = 24);
// Axis is one of 0/1/2; the cylinder spans [center - h/2, center + h/2] on it.
Mesh make_cylinder(Vec3 center, double radius, double height, int axis = 1, int segments = 32);
// Open cone surface (no base cap) along +Y from base_y to apex_y.
Mesh make_open_cone(Vec3 base_center, double radius, double height, int segments = 32);
Mesh make_quad(Vec3 a, Vec3 b, Vec3 c, Vec3 d);

Mesh translated(Mesh m, Vec3 offset);

}  // namespace partforge
