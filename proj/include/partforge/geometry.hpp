#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "partforge/asset.hpp"
#include "partforge/vec.hpp"

namespace partforge {

// p' = (p - center) * scale. The same transform applies to every part.
struct NormalizationTransform {
  Vec3 center;
  double scale = 1.0;

  Vec3 apply(Vec3 p) const { return (p - center) * scale; }
  Vec3 invert(Vec3 p) const { return p / scale + center; }
  Mesh apply(const Mesh& m) const;
};

// Maps the holistic bounding box into [-1,1]^3 with the longest axis spanning
// exactly [-1,1]. Throws ZeroExtent when every vertex coincides.
NormalizationTransform unit_box_transform(const MultiPartAsset& asset);
std::pair<MultiPartAsset, NormalizationTransform> normalize_to_unit_box(const MultiPartAsset& asset);

enum class DegenerateFlag : std::uint8_t { Empty = 1, ZeroArea = 2, NanVertices = 4 };

class DegenerateFlags {
 public:
  void set(DegenerateFlag f) { bits_ |= static_cast<std::uint8_t>(f); }
  bool has(DegenerateFlag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  bool none() const { return bits_ == 0; }
  friend bool operator==(DegenerateFlags, DegenerateFlags) = default;

 private:
  std::uint8_t bits_ = 0;
};

inline constexpr double kDegenerateAreaEpsilon = 1e-10;

// Area is measured in the mesh's own units; callers pass normalized meshes.
DegenerateFlags detect_degenerate(const Mesh& mesh);

struct GridSpec {
  int resolution = 64;  // grid is resolution^3 points
  Vec3 origin;
  double spacing = 1.0;

  Vec3 point(int i, int j, int k) const {
    return {origin.x + i * spacing, origin.y + j * spacing, origin.z + k * spacing};
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * resolution + j) * resolution + i;
  }
  std::size_t point_count() const {
    return static_cast<std::size_t>(resolution) * resolution * resolution;
  }
};

// Cubic grid centred on the mesh bounds, covering the longest extent plus
// `padding` on each side.
GridSpec fit_grid(const Aabb& bounds, int resolution, double padding);

struct ScalarGrid {
  GridSpec spec;
  std::vector<double> values;  // x-fastest

  double at(int i, int j, int k) const { return values[spec.index(i, j, k)]; }
};

// Exact unsigned distance to the triangle set at every grid point, via a BVH.
// Parallel over z-slices. Throws DegenerateInput / InvalidArgument.
ScalarGrid compute_udf(const Mesh& mesh, int resolution, double padding);
ScalarGrid compute_udf(const Mesh& mesh, const GridSpec& spec);

inline constexpr double kDefaultIsoSpacingFactor = 1.5;

// Dual contouring of {value < iso}: one vertex per sign-changing cell at the
// average of its edge crossings, one quad per crossing grid edge. The inside
// set is first made well-composed so the result is a closed 2-manifold.
// Throws InvalidArgument (iso <= 0) and NoSurface.
Mesh extract_level_set(const ScalarGrid& grid, double iso);

struct ManifoldReport {
  bool is_closed = false;
  bool is_two_manifold = false;
  bool is_consistently_oriented = false;
  std::size_t boundary_edge_count = 0;
  std::size_t non_manifold_edge_count = 0;
  std::size_t non_manifold_vertex_count = 0;
  std::size_t connected_components = 0;
};

ManifoldReport check_manifold(const Mesh& mesh);

// Signed volume by the divergence theorem (positive for outward winding).
double signed_volume(const Mesh& mesh);
// Splits a mesh into face-connected components (sharing vertices).
std::vector<Mesh> split_components(const Mesh& mesh);

inline constexpr int kVisibilityDirections = 64;
inline constexpr int kVisibilityAttemptFactor = 20;

// Area-weighted surface samples with face normals. With the visibility filter,
// candidates whose 64 outward hemisphere rays are all blocked are rejected.
// Throws DegenerateInput and VisibilityExhausted.
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed, bool visibility_filter);

// Fixed hemisphere direction set around +Z (Fibonacci lattice).
std::vector<Vec3> hemisphere_directions(int count);

enum class StartRule { FirstIndex, FarthestFromCentroid };

// Greedy farthest point sampling; ties break to the lowest index.
std::vector<std::uint32_t> farthest_point_sample(std::span<const Vec3> points, std::size_t k,
                                                 StartRule start = StartRule::FarthestFromCentroid);
std::vector<std::uint32_t> farthest_point_sample(const PointCloud& pc, std::size_t k,
                                                 StartRule start = StartRule::FarthestFromCentroid);

PointCloud select_points(const PointCloud& pc, std::span<const std::uint32_t> indices);

// PFPC: "PFPC", u32 LE count, count x 6 f32 LE (x,y,z,nx,ny,nz).
std::vector<std::uint8_t> encode_pfpc(const PointCloud& pc);
PointCloud decode_pfpc(std::span<const std::uint8_t> bytes);
void write_pfpc(const std::filesystem::path& path, const PointCloud& pc);
PointCloud read_pfpc(const std::filesystem::path& path);

// Serial reference versions of the parallel kernels, kept for parity tests
// and benchmarks.
namespace reference {
ScalarGrid compute_udf(const Mesh& mesh, const GridSpec& spec);
std::vector<std::uint32_t> farthest_point_sample(std::span<const Vec3> points, std::size_t k, StartRule start);
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed, bool visibility_filter);
}  // namespace reference

}  // namespace partforge
