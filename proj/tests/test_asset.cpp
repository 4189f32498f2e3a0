#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "fixture_assets.hpp"
#include "json.hpp"
#include "partforge/asset.hpp"
#include "partforge/errors.hpp"
#include "partforge/primitives.hpp"
#include "partforge/rng.hpp"
#include "temp_dir.hpp"

using namespace partforge;
using partforge::fixtures::TempDir;

namespace {

Mesh random_mesh(Rng& rng) {
  Mesh m;
  const int nv = 3 + static_cast<int>(rng.below(30));
  for (int i = 0; i < nv; ++i) {
    m.vertices.push_back({rng.normal() * 3.0, rng.normal() * 1e-3, rng.uniform() * 1e4 - 5e3});
  }
  const int nf = 1 + static_cast<int>(rng.below(40));
  for (int f = 0; f < nf; ++f) {
    m.faces.push_back({static_cast<std::uint32_t>(rng.below(nv)), static_cast<std::uint32_t>(rng.below(nv)),
                       static_cast<std::uint32_t>(rng.below(nv))});
  }
  return m;
}

MultiPartAsset random_asset(Rng& rng, int index) {
  MultiPartAsset a;
  a.asset_id = "rand_" + std::to_string(index);
  a.source = static_cast<Source>(rng.below(4));
  const int parts = 1 + static_cast<int>(rng.below(5));
  for (int p = 0; p < parts; ++p) a.parts.push_back({"part " + std::to_string(p), random_mesh(rng)});
  if (rng.below(2)) a.global_caption = "caption " + std::to_string(index);
  return a;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

}  // namespace

TEST(Asset, RoundTripIsBitExactOn100RandomAssets) {
  Rng rng(7);
  TempDir dir("roundtrip");
  for (int i = 0; i < 100; ++i) {
    const auto a = random_asset(rng, i);
    const auto path = dir / a.asset_id;
    const auto manifest = save_asset(a, path);
    EXPECT_EQ(manifest.parts.size(), a.parts.size());
    const auto b = load_asset(path);
    ASSERT_EQ(b.asset_id, a.asset_id);
    EXPECT_EQ(b.source, a.source);
    EXPECT_EQ(b.global_caption, a.global_caption);
    ASSERT_EQ(b.parts.size(), a.parts.size());
    for (std::size_t p = 0; p < a.parts.size(); ++p) {
      EXPECT_EQ(b.parts[p].name, a.parts[p].name);
      ASSERT_EQ(b.parts[p].mesh.vertices.size(), a.parts[p].mesh.vertices.size());
      for (std::size_t v = 0; v < a.parts[p].mesh.vertices.size(); ++v) {
        const auto x = a.parts[p].mesh.vertices[v], y = b.parts[p].mesh.vertices[v];
        ASSERT_TRUE(x.x == y.x && x.y == y.y && x.z == y.z) << "asset " << i << " part " << p << " vertex " << v;
      }
      EXPECT_EQ(b.parts[p].mesh.faces, a.parts[p].mesh.faces);
    }
  }
}

TEST(Asset, SaveLoadWritesManifestAndOneFilePerPart) {
  TempDir dir("two");
  MultiPartAsset a;
  a.asset_id = "two";
  a.parts = {{"a", make_box({0, 0, 0}, {1, 1, 1})}, {"b", make_box({2, 0, 0}, {3, 1, 1})}};
  save_asset(a, dir / "two");
  std::size_t objs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "two")) objs += e.path().extension() == ".obj";
  EXPECT_EQ(objs, 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "two" / "manifest.json"));
}

TEST(Asset, SaveRejectsEmptyAsset) {
  TempDir dir("empty");
  MultiPartAsset a;
  a.asset_id = "empty";
  EXPECT_THROW(save_asset(a, dir / "empty"), InvalidAsset);
}

TEST(Asset, MissingManifestIsReported) {
  TempDir dir("nomanifest");
  EXPECT_THROW(load_asset(dir.path()), MissingManifest);
}

TEST(Asset, MissingPartFileIsMalformedMeshNamingThePart) {
  TempDir dir("missing");
  write_text(dir / "manifest.json",
             R"({"asset_id":"x","source":"synthetic","global_caption":null,"parts":[{"name":"wheel","file":"wheel.obj"}]})");
  try {
    load_asset(dir.path());
    FAIL() << "expected MalformedMesh";
  } catch (const MalformedMesh& e) {
    EXPECT_EQ(e.part(), "wheel");
  }
}

TEST(Asset, FaceIndexOutOfRangeNamesThePart) {
  TempDir dir("oor");
  std::string obj;
  for (int i = 0; i < 10; ++i) obj += "v " + std::to_string(i) + " 0 0\n";
  obj += "f 1 2 999\n";
  write_text(dir / "p.obj", obj);
  write_text(dir / "manifest.json",
             R"({"asset_id":"x","source":"synthetic","global_caption":null,"parts":[{"name":"plate","file":"p.obj"}]})");
  try {
    load_asset(dir.path());
    FAIL() << "expected IndexOutOfRange";
  } catch (const IndexOutOfRange& e) {
    EXPECT_EQ(e.part(), "plate");
  }
}

TEST(Asset, ObjParserCountsIgnoredRecordsAndReadsNormalsUvs) {
  ObjStats stats;
  const auto m = parse_obj(
      "# comment\nmtllib x.mtl\no thing\ng group\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\n"
      "vn 0 0 1\nvn 0 0 1\nvn 0 0 1\nusemtl m\nf 1/1/1 2/2/2 3/3/3\n",
      "tri", &stats);
  EXPECT_EQ(m.vertices.size(), 3u);
  EXPECT_EQ(m.faces.size(), 1u);
  EXPECT_TRUE(m.has_normals());
  EXPECT_TRUE(m.has_uvs());
  EXPECT_GE(stats.ignored_records, 4u);
}

TEST(Asset, NanVertexIsMalformed) {
  EXPECT_THROW(parse_obj("v nan 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", "bad"), MalformedMesh);
}

TEST(Asset, NonUnitNormalIsMalformed) {
  Mesh m = make_box({0, 0, 0}, {1, 1, 1});
  m.normals.assign(m.vertices.size(), Vec3{0, 0, 2});
  EXPECT_THROW(validate_mesh(m, "box"), MalformedMesh);
}

TEST(Asset, ConcatTwoCubes) {
  MultiPartAsset a;
  a.parts = {{"a", make_box({0, 0, 0}, {1, 1, 1})}, {"b", make_box({2, 0, 0}, {3, 1, 1})}};
  const auto m = concat_parts(a);
  EXPECT_EQ(m.vertices.size(), 16u);
  EXPECT_EQ(m.faces.size(), 24u);
  for (std::size_t f = 12; f < 24; ++f) {
    for (auto idx : m.faces[f]) EXPECT_GE(idx, 8u);
  }
}

TEST(Asset, ConcatSinglePartIsIdentity) {
  MultiPartAsset a;
  a.parts = {{"a", make_uv_sphere({0.1, 0.2, 0.3}, 0.5, 12, 6)}};
  const auto m = concat_parts(a);
  EXPECT_EQ(m.faces, a.parts[0].mesh.faces);
  ASSERT_EQ(m.vertices.size(), a.parts[0].mesh.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_EQ(m.vertices[i].x, a.parts[0].mesh.vertices[i].x);
}

TEST(Asset, ConcatPreservesAreaAndFaceCount) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    MultiPartAsset a;
    double area = 0.0;
    std::size_t faces = 0;
    for (int p = 0; p < 5; ++p) {
      a.parts.push_back({"p" + std::to_string(p), random_mesh(rng)});
      area += a.parts.back().mesh.surface_area();
      faces += a.parts.back().mesh.faces.size();
    }
    const auto m = concat_parts(a);
    EXPECT_EQ(m.faces.size(), faces);
    EXPECT_NEAR(m.surface_area(), area, 1e-9 * std::max(1.0, area));
  }
}

TEST(Asset, DuplicatePartNamesAreInvalid) {
  MultiPartAsset a;
  a.asset_id = "dup";
  a.parts = {{"x", make_box({0, 0, 0}, {1, 1, 1})}, {"x", make_box({2, 0, 0}, {3, 1, 1})}};
  EXPECT_THROW(validate_asset(a), InvalidAsset);
}

TEST(Schema, RejectsEmptyAndCaseFoldCollisions) {
  EXPECT_THROW(PartSchema({}), InvalidSchema);
  EXPECT_THROW(PartSchema({"Wheel", " wheel "}), InvalidSchema);
  const PartSchema s({"Wheel", "Body"});
  EXPECT_TRUE(s.contains("wheel"));
  EXPECT_FALSE(s.contains("door"));
}

TEST(Manifest, StagesFormAPrefixChain) {
  AssetManifest m;
  EXPECT_THROW(m.record_stage(Stage::Filter), InvalidArgument);
  m.record_stage(Stage::Preprocess);
  m.record_stage(Stage::Filter);
  EXPECT_TRUE(m.is_done(Stage::Filter));
  EXPECT_FALSE(m.is_done(Stage::Cluster));
  EXPECT_THROW(m.record_stage(Stage::Postprocess), InvalidArgument);
}

TEST(Asset, SanitizedNamesAreFileSafe) {
  const auto s = sanitize_name("front/left wheel: #1");
  EXPECT_EQ(s.find('/'), std::string::npos);
  EXPECT_EQ(s.find(' '), std::string::npos);
  EXPECT_FALSE(s.empty());
}
