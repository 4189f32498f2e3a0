#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixture_assets.hpp"
#include "oracles.hpp"
#include "partforge/bvh.hpp"
#include "partforge/errors.hpp"
#include "partforge/geometry.hpp"
#include "partforge/kdtree.hpp"
#include "partforge/primitives.hpp"
#include "partforge/rng.hpp"

using namespace partforge;

namespace {

MultiPartAsset one_part(Mesh m) {
  MultiPartAsset a;
  a.asset_id = "a";
  a.parts = {{"p", std::move(m)}};
  return a;
}

}  // namespace

TEST(Normalize, CubeZeroToTwo) {
  const auto [n, t] = normalize_to_unit_box(one_part(make_box({0, 0, 0}, {2, 2, 2})));
  EXPECT_DOUBLE_EQ(t.scale, 1.0);
  EXPECT_DOUBLE_EQ(t.center.x, 1.0);
  const auto b = n.parts[0].mesh.bounds();
  EXPECT_DOUBLE_EQ(b.lo.x, -1.0);
  EXPECT_DOUBLE_EQ(b.hi.z, 1.0);
}

TEST(Normalize, AspectIsPreserved) {
  const auto [n, t] = normalize_to_unit_box(one_part(make_box({-2, -1, -1}, {2, 1, 1})));
  const auto b = n.parts[0].mesh.bounds();
  EXPECT_DOUBLE_EQ(b.lo.x, -1.0);
  EXPECT_DOUBLE_EQ(b.hi.x, 1.0);
  EXPECT_DOUBLE_EQ(b.lo.y, -0.5);
  EXPECT_DOUBLE_EQ(b.hi.y, 0.5);
}

TEST(Normalize, SameTransformForEveryPartAndInvertible) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    MultiPartAsset a;
    for (int p = 0; p < 4; ++p) {
      const Vec3 lo{rng.normal() * 5, rng.normal() * 5, rng.normal() * 5};
      a.parts.push_back({"p" + std::to_string(p), make_box(lo, lo + Vec3{rng.uniform() + 0.1, 1.0, 2.0})});
    }
    const auto [n, t] = normalize_to_unit_box(a);
    Aabb all;
    for (std::size_t p = 0; p < a.parts.size(); ++p) {
      for (std::size_t v = 0; v < a.parts[p].mesh.vertices.size(); ++v) {
        const Vec3 expect = (a.parts[p].mesh.vertices[v] - t.center) * t.scale;
        const Vec3 got = n.parts[p].mesh.vertices[v];
        ASSERT_NEAR(oracle::sq(expect, got), 0.0, 1e-24);
        ASSERT_NEAR(oracle::sq(t.invert(got), a.parts[p].mesh.vertices[v]), 0.0, 1e-20);
        all.expand(got);
      }
    }
    const double longest = std::max({all.hi.x - all.lo.x, all.hi.y - all.lo.y, all.hi.z - all.lo.z});
    EXPECT_NEAR(longest, 2.0, 1e-12);
    EXPECT_GE(all.lo.x, -1.0 - 1e-12);
    EXPECT_LE(all.hi.y, 1.0 + 1e-12);
  }
}

TEST(Normalize, ZeroExtentThrows) {
  Mesh m;
  m.vertices = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  m.faces = {{0, 1, 2}};
  EXPECT_THROW(normalize_to_unit_box(one_part(m)), ZeroExtent);
}

TEST(Degenerate, Flags) {
  Mesh empty;
  EXPECT_TRUE(detect_degenerate(empty).has(DegenerateFlag::Empty));
  Mesh line;
  line.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  line.faces = {{0, 1, 2}};
  const auto f = detect_degenerate(line);
  EXPECT_TRUE(f.has(DegenerateFlag::ZeroArea));
  EXPECT_FALSE(f.has(DegenerateFlag::Empty));
  EXPECT_TRUE(detect_degenerate(make_box({0, 0, 0}, {1, 1, 1})).none());
  Mesh nan = make_box({0, 0, 0}, {1, 1, 1});
  nan.vertices[0].x = std::nan("");
  EXPECT_TRUE(detect_degenerate(nan).has(DegenerateFlag::NanVertices));
}

TEST(Bvh, ClosestMatchesBruteForce) {
  Rng rng(5);
  const auto car = concat_parts(partforge::fixtures::toy_car());
  const TriangleBvh bvh(car);
  for (int i = 0; i < 300; ++i) {
    const Vec3 p{rng.uniform() * 3 - 1.5, rng.uniform() * 2 - 0.5, rng.uniform() * 2 - 1};
    EXPECT_NEAR(bvh.distance(p), oracle::mesh_distance(p, car), 1e-9);
  }
}

TEST(Udf, CubeCentreAndVertex) {
  const auto cube = make_box({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5});
  GridSpec spec;
  spec.resolution = 9;
  spec.origin = {-1, -1, -1};
  spec.spacing = 0.25;
  const auto g = compute_udf(cube, spec);
  EXPECT_NEAR(g.at(4, 4, 4), 0.5, 1e-12);
  EXPECT_NEAR(g.at(2, 2, 2), 0.0, 1e-12);
}

TEST(Udf, MatchesBruteForceAndReferenceAndIsLipschitz) {
  const auto lamp = concat_parts(partforge::fixtures::lamp());
  const auto g = compute_udf(lamp, 24, 0.1);
  const auto r = reference::compute_udf(lamp, g.spec);
  ASSERT_EQ(g.values.size(), r.values.size());
  for (std::size_t i = 0; i < g.values.size(); ++i) ASSERT_EQ(g.values[i], r.values[i]);
  Rng rng(9);
  for (int q = 0; q < 200; ++q) {
    const int i = static_cast<int>(rng.below(24)), j = static_cast<int>(rng.below(24)),
              k = static_cast<int>(rng.below(24));
    EXPECT_NEAR(g.at(i, j, k), oracle::mesh_distance(g.spec.point(i, j, k), lamp), 1e-6);
  }
  for (int k = 0; k + 1 < 24; ++k) {
    for (int j = 0; j < 24; ++j) {
      for (int i = 0; i < 24; ++i) {
        ASSERT_GE(g.at(i, j, k), 0.0);
        ASSERT_LE(std::abs(g.at(i, j, k + 1) - g.at(i, j, k)), g.spec.spacing + 1e-12);
      }
    }
  }
}

TEST(Udf, RejectsTinyResolutionAndEmptyMesh) {
  EXPECT_THROW(compute_udf(make_box({0, 0, 0}, {1, 1, 1}), 4, 0.1), InvalidArgument);
  EXPECT_THROW(compute_udf(Mesh{}, 16, 0.1), DegenerateInput);
}

TEST(LevelSet, SphereIsClosedManifoldWithCorrectVolume) {
  const auto sphere = make_uv_sphere({0, 0, 0}, 0.8, 64, 32);
  const auto g = compute_udf(sphere, 64, 0.08 * 1.6);
  const auto m = extract_level_set(g, 1.5 * g.spec.spacing);
  const auto r = check_manifold(m);
  EXPECT_TRUE(r.is_closed);
  EXPECT_TRUE(r.is_two_manifold);
  EXPECT_EQ(r.boundary_edge_count, 0u);
  const double analytic = 4.0 / 3.0 * std::numbers::pi * 0.8 * 0.8 * 0.8;
  // Two sheets bound the offset shell; their mean volume approximates the sphere.
  const auto comps = split_components(m);
  ASSERT_EQ(comps.size(), 2u);
  const double v0 = signed_volume(comps[0]), v1 = signed_volume(comps[1]);
  EXPECT_GT(std::max(v0, v1), analytic);
  EXPECT_LT(std::abs(std::min(v0, v1)), analytic);
  EXPECT_LT(std::min(v0, v1), 0.0);
  EXPECT_NEAR(signed_volume(m), v0 + v1, 1e-9);
  const double mean = 0.5 * (std::abs(v0) + std::abs(v1));
  EXPECT_NEAR(mean, analytic, 0.05 * analytic);
}

TEST(LevelSet, VerticesLieNearTheIsoSurface) {
  const auto mesh = concat_parts(partforge::fixtures::table());
  const auto g = compute_udf(mesh, 40, 0.1);
  const double iso = 1.5 * g.spec.spacing;
  const auto m = extract_level_set(g, iso);
  const TriangleBvh bvh(mesh);
  for (std::size_t i = 0; i < m.vertices.size(); i += 7) {
    EXPECT_LT(std::abs(bvh.distance(m.vertices[i]) - iso), 2.0 * g.spec.spacing);
  }
}

TEST(LevelSet, NoSurfaceAndBadIso) {
  ScalarGrid g;
  g.spec.resolution = 8;
  g.spec.spacing = 0.1;
  g.values.assign(g.spec.point_count(), 10.0);
  EXPECT_THROW(extract_level_set(g, 0.05), NoSurface);
  EXPECT_THROW(extract_level_set(g, 0.0), InvalidArgument);
}

TEST(LevelSet, OutputAlwaysPassesManifoldCheck) {
  for (const auto& [name, mesh] : partforge::fixtures::watertight_meshes()) {
    const auto g = compute_udf(mesh, 32, 0.08 * 2.0);
    const auto m = extract_level_set(g, 1.5 * g.spec.spacing);
    const auto r = check_manifold(m);
    EXPECT_TRUE(r.is_closed && r.is_two_manifold && r.is_consistently_oriented) << name;
    EXPECT_GT(signed_volume(m), 0.0) << name;
  }
}

TEST(Manifold, CubeTriangleAndFan) {
  const auto cube = check_manifold(make_box({0, 0, 0}, {1, 1, 1}));
  EXPECT_TRUE(cube.is_closed);
  EXPECT_TRUE(cube.is_two_manifold);
  EXPECT_EQ(cube.boundary_edge_count, 0u);
  EXPECT_EQ(cube.non_manifold_edge_count, 0u);
  EXPECT_EQ(cube.connected_components, 1u);

  Mesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.faces = {{0, 1, 2}};
  const auto t = check_manifold(tri);
  EXPECT_EQ(t.boundary_edge_count, 3u);
  EXPECT_FALSE(t.is_closed);

  Mesh fan;
  fan.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
  fan.faces = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
  const auto f = check_manifold(fan);
  EXPECT_EQ(f.non_manifold_edge_count, 1u);
  EXPECT_FALSE(f.is_two_manifold);
  EXPECT_EQ(f.is_closed, f.boundary_edge_count == 0);
}

TEST(Sampling, UnitSquareMeanNearCentroid) {
  const auto sq = make_quad({0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0});
  const auto pc = sample_surface(sq, 10000, 1, false);
  ASSERT_EQ(pc.size(), 10000u);
  Vec3 mean;
  for (const auto& p : pc.points) mean = mean + p;
  mean = mean / 10000.0;
  EXPECT_NEAR(mean.x, 0.5, 0.02);
  EXPECT_NEAR(mean.y, 0.5, 0.02);
  for (const auto& n : pc.normals) EXPECT_NEAR(std::abs(n.z), 1.0, 1e-12);
}

TEST(Sampling, DeterministicAndMatchesReference) {
  const auto car = concat_parts(partforge::fixtures::toy_car());
  const auto a = sample_surface(car, 2000, 42, true);
  const auto b = sample_surface(car, 2000, 42, true);
  const auto r = reference::sample_surface(car, 2000, 42, true);
  ASSERT_EQ(a.size(), 2000u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.points[i].x, b.points[i].x);
    ASSERT_EQ(a.points[i].x, r.points[i].x);
    ASSERT_EQ(a.normals[i].y, r.normals[i].y);
  }
  const auto c = sample_surface(car, 2000, 43, true);
  EXPECT_NE(a.points[0].x, c.points[0].x);
}

TEST(Sampling, VisibilityFilterKeepsAllCubeFacesAndDropsEnclosedParts) {
  const auto cube = make_box({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5});
  const auto pc = sample_surface(cube, 3000, 3, true);
  int faces[6] = {0, 0, 0, 0, 0, 0};
  for (const auto& n : pc.normals) {
    const int axis = std::abs(n.x) > 0.5 ? 0 : (std::abs(n.y) > 0.5 ? 1 : 2);
    const bool pos = (axis == 0 ? n.x : axis == 1 ? n.y : n.z) > 0;
    ++faces[axis * 2 + (pos ? 1 : 0)];
  }
  for (int f = 0; f < 6; ++f) EXPECT_GT(faces[f], 300) << "face " << f;

  const auto outer = make_box({-1, -1, -1}, {1, 1, 1});
  const auto inner = make_box({-0.2, -0.2, -0.2}, {0.2, 0.2, 0.2});
  const auto both = concat_meshes({&outer, &inner});
  for (const auto& p : sample_surface(both, 2000, 4, true).points) {
    EXPECT_GT(std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)}), 0.9);
  }
}

TEST(Sampling, EmptyMeshIsDegenerate) {
  EXPECT_THROW(sample_surface(Mesh{}, 10, 1, false), DegenerateInput);
}

TEST(Fps, UnitSquareCorners) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const auto idx = farthest_point_sample(std::span<const Vec3>(pts), 2, StartRule::FirstIndex);
  EXPECT_EQ(idx, (std::vector<std::uint32_t>{0, 3}));
}

TEST(Fps, KEqualsNIsAPermutation) {
  Rng rng(2);
  const auto pts = oracle::random_cloud(rng, 100);
  auto idx = farthest_point_sample(std::span<const Vec3>(pts), 100, StartRule::FarthestFromCentroid);
  std::sort(idx.begin(), idx.end());
  for (std::uint32_t i = 0; i < 100; ++i) EXPECT_EQ(idx[i], i);
}

TEST(Fps, MatchesBruteForceAndReference) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = oracle::random_cloud(rng, 300);
    for (auto rule : {StartRule::FirstIndex, StartRule::FarthestFromCentroid}) {
      const auto got = farthest_point_sample(std::span<const Vec3>(pts), 50, rule);
      EXPECT_EQ(got, oracle::fps(pts, 50, rule));
      EXPECT_EQ(got, reference::farthest_point_sample(pts, 50, rule));
    }
  }
}

TEST(Fps, DuplicatesTieToLowestIndex) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {0, 0, 0}};
  const auto idx = farthest_point_sample(std::span<const Vec3>(pts), 4, StartRule::FirstIndex);
  EXPECT_EQ(idx, (std::vector<std::uint32_t>{0, 1, 2, 3}));
  EXPECT_THROW(farthest_point_sample(std::span<const Vec3>(pts), 5, StartRule::FirstIndex), InvalidArgument);
  EXPECT_THROW(farthest_point_sample(std::span<const Vec3>(pts), 0, StartRule::FirstIndex), InvalidArgument);
}

TEST(KdTree, NearestMatchesBruteForce) {
  Rng rng(12);
  const auto pts = oracle::random_cloud(rng, 500);
  const KdTree tree(pts);
  for (int q = 0; q < 500; ++q) {
    const Vec3 p{rng.normal(), rng.normal(), rng.normal()};
    EXPECT_DOUBLE_EQ(tree.nearest(p).squared_distance, oracle::min_sq(p, pts));
  }
}

TEST(Pfpc, EncodeDecodeLayout) {
  PointCloud pc;
  pc.points = {{1, 2, 3}, {-0.5, 0.25, 8}};
  pc.normals = {{0, 0, 1}, {1, 0, 0}};
  const auto bytes = encode_pfpc(pc);
  ASSERT_EQ(bytes.size(), 4u + 4u + 2u * 24u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PFPC");
  EXPECT_EQ(bytes[4], 2);
  EXPECT_EQ(bytes[5], 0);
  const auto back = decode_pfpc(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.points[1].y, 0.25);
  EXPECT_EQ(back.normals[1].x, 1.0);
}
