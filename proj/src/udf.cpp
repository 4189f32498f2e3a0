#include <omp.h>

#include "partforge/bvh.hpp"
#include "partforge/errors.hpp"
#include "partforge/geometry.hpp"

namespace partforge {

namespace {

void check_udf_input(const Mesh& mesh, const GridSpec& spec) {
  if (!detect_degenerate(mesh).none()) throw DegenerateInput("compute_udf needs a non-degenerate mesh");
  if (spec.resolution < 8) throw InvalidArgument("grid resolution must be >= 8");
  if (!(spec.spacing > 0.0)) throw InvalidArgument("grid spacing must be positive");
}

void fill_slice(const TriangleBvh& bvh, const GridSpec& spec, int k, std::vector<double>& values) {
  const int r = spec.resolution;
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < r; ++i) values[spec.index(i, j, k)] = bvh.distance(spec.point(i, j, k));
  }
}

}  // namespace

ScalarGrid compute_udf(const Mesh& mesh, int resolution, double padding) {
  if (resolution < 8) throw InvalidArgument("grid resolution must be >= 8");
  if (!detect_degenerate(mesh).none()) throw DegenerateInput("compute_udf needs a non-degenerate mesh");
  return compute_udf(mesh, fit_grid(mesh.bounds(), resolution, padding));
}

ScalarGrid compute_udf(const Mesh& mesh, const GridSpec& spec) {
  check_udf_input(mesh, spec);
  const TriangleBvh bvh(mesh);
  ScalarGrid grid{spec, std::vector<double>(spec.point_count())};
  const int r = spec.resolution;
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < r; ++k) fill_slice(bvh, spec, k, grid.values);
  return grid;
}

namespace reference {

ScalarGrid compute_udf(const Mesh& mesh, const GridSpec& spec) {
  check_udf_input(mesh, spec);
  const TriangleBvh bvh(mesh);
  ScalarGrid grid{spec, std::vector<double>(spec.point_count())};
  for (int k = 0; k < spec.resolution; ++k) fill_slice(bvh, spec, k, grid.values);
  return grid;
}

}  // namespace reference

}  // namespace partforge
