#include <gtest/gtest.h>

#include <fstream>

#include "fixture_assets.hpp"
#include "oracles.hpp"
#include "partforge/errors.hpp"
#include "partforge/geometry.hpp"
#include "partforge/pipeline.hpp"
#include "partforge/primitives.hpp"
#include "temp_dir.hpp"
#include "tree_snapshot.hpp"

using namespace partforge;
using partforge::fixtures::TempDir;

namespace {

const std::filesystem::path kFixtures = PARTFORGE_FIXTURE_DIR;

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

CatalogEntry entry(const std::string& id, Provenance p, const std::string& path = "x") {
  CatalogEntry e;
  e.asset_id = id;
  e.provenance = p;
  e.path = path;
  return e;
}

PipelineConfig fixture_config(const std::filesystem::path& out) {
  PipelineConfig c;
  c.output_root = out;
  c.grid_resolution = 64;
  c.points_per_sample = 8192;
  c.progress_every = 0;
  return c;
}

Mesh sliver() {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  m.faces = {{0, 1, 2}};
  return m;
}

std::map<std::string, std::set<int>> cluster_map(const AssetRecord& r) {
  std::map<std::string, std::set<int>> out;
  for (const auto& c : r.clusters) out[c.name] = {c.part_ids.begin(), c.part_ids.end()};
  return out;
}

}  // namespace

TEST(Catalog, LoadResolvesRelativePaths) {
  TempDir dir("catalog");
  write_text(dir / "c.json",
             R"({"assets":[{"asset_id":"a","source":"sketchfab","provenance":"raw_artist","path":"assets/a"}]})");
  const auto c = load_catalog(dir / "c.json");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].path, dir / "assets/a");
  EXPECT_EQ(c[0].source, Source::Sketchfab);
  EXPECT_EQ(c[0].provenance, Provenance::RawArtist);
}

TEST(Catalog, ExclusionListSkipsCommentsAndBlanks) {
  TempDir dir("excl");
  write_text(dir / "x.txt", "# header\nalpha\n\n  beta  \n");
  EXPECT_EQ(load_exclusion_list(dir / "x.txt"), (std::set<std::string>{"alpha", "beta"}));
}

TEST(Dedup, HigherPrioritySourceWins) {
  const auto out = dedup({entry("a", Provenance::Synthetic, "syn"), entry("b", Provenance::RawArtist),
                          entry("a", Provenance::HumanCorrected, "human")});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].asset_id, "a");
  EXPECT_EQ(out[0].path, "human");
  EXPECT_EQ(out[1].asset_id, "b");
}

TEST(Dedup, ExcludedIdsDroppedAndDisjointConcatenated) {
  const auto out = dedup({entry("a", Provenance::RawArtist), entry("b", Provenance::Synthetic),
                          entry("c", Provenance::HumanCorrected)},
                         {"b"});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].asset_id, "a");
  EXPECT_EQ(out[1].asset_id, "c");
}

TEST(Preprocess, PartCountWindow) {
  const auto one = preprocess(fixtures::single_part());
  ASSERT_TRUE(std::holds_alternative<Reject>(one));
  EXPECT_EQ(std::get<Reject>(one).reason, "TooFewParts");
  const auto many = preprocess(fixtures::many_parts(33));
  ASSERT_TRUE(std::holds_alternative<Reject>(many));
  EXPECT_EQ(std::get<Reject>(many).reason, "TooManyParts");
  EXPECT_TRUE(std::holds_alternative<MultiPartAsset>(preprocess(fixtures::many_parts(32))));
  EXPECT_TRUE(std::holds_alternative<MultiPartAsset>(preprocess(fixtures::many_parts(2))));
}

TEST(Preprocess, ZeroAreaPartDroppedAndResultNormalized) {
  MultiPartAsset a;
  a.asset_id = "seven";
  for (int i = 0; i < 6; ++i) {
    a.parts.push_back({"box" + std::to_string(i), make_box({3.0 * i, 0, 0}, {3.0 * i + 1, 2, 1})});
  }
  a.parts.push_back({"sliver", sliver()});
  std::vector<std::string> dropped;
  const auto out = preprocess(a, &dropped);
  ASSERT_TRUE(std::holds_alternative<MultiPartAsset>(out));
  const auto& kept = std::get<MultiPartAsset>(out);
  EXPECT_EQ(kept.parts.size(), 6u);
  EXPECT_EQ(dropped, (std::vector<std::string>{"sliver"}));
  double lo = 1e9, hi = -1e9;
  for (const auto& p : kept.parts) {
    for (const auto& v : p.mesh.vertices) {
      for (double c : {v.x, v.y, v.z}) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
    }
  }
  EXPECT_NEAR(lo, -1.0, 1e-12);
  EXPECT_NEAR(hi, 1.0, 1e-12);
}

TEST(Preprocess, EmptyPartsCountTowardsTooFew) {
  MultiPartAsset a;
  a.asset_id = "e";
  a.parts = {{"box", make_box({0, 0, 0}, {1, 1, 1})}, {"nothing", Mesh{}}};
  const auto out = preprocess(a);
  ASSERT_TRUE(std::holds_alternative<Reject>(out));
  EXPECT_EQ(std::get<Reject>(out).reason, "TooFewParts");
}

TEST(Pipeline, EndToEndReplayIsIdempotentAndConserving) {
  TempDir out("e2e");
  const auto catalog = dedup(load_catalog(kFixtures / "catalog.json"));
  ReplayClient client(kFixtures / "vlm");
  const auto first = run_pipeline(catalog, fixture_config(out.path()), client);

  EXPECT_TRUE(first.rejections.entries.empty());
  EXPECT_EQ(first.manifest.assets.size() + first.rejections.entries.size(), catalog.size());
  EXPECT_EQ(first.recomputed.size(), 3u);
  const std::map<std::string, std::map<std::string, std::set<int>>> expected{
      {"toy_car", {{"wheels", {1, 2, 3, 4}}, {"body", {5}}}},
      {"table", {{"tabletop", {1}}, {"legs", {2, 3, 4, 5}}}},
      {"lamp", {{"base", {1}}, {"pole", {2}}, {"lampshade", {3, 4}}}},
  };
  for (const auto& [id, clusters] : expected) {
    const auto* r = first.manifest.find(id);
    ASSERT_NE(r, nullptr) << id;
    EXPECT_EQ(cluster_map(*r), clusters) << id;
    EXPECT_GE(r->clusters.size(), kMinParts);
    EXPECT_LE(r->clusters.size(), kMaxParts);
    for (const auto& c : r->clusters) {
      const auto mesh = read_obj(out / c.mesh_file, c.name);
      const auto report = check_manifold(mesh);
      EXPECT_TRUE(report.is_closed && report.is_two_manifold) << id << "/" << c.name;
      EXPECT_EQ(read_pfpc(out / c.points_file).size(), 8192u);
    }
    EXPECT_EQ(read_pfpc(out / r->full_points_file).size(), 8192u);
  }
  EXPECT_EQ(first.manifest.find("toy_car")->unlabeled_part_ids, (std::vector<int>{6}));
  EXPECT_EQ(first.manifest.part_count(), 7u);

  const auto before = fixtures::snapshot_tree(out.path());
  const auto second = run_pipeline(catalog, fixture_config(out.path()), client);
  EXPECT_TRUE(second.recomputed.empty());
  EXPECT_EQ(to_json(second.manifest), to_json(first.manifest));
  EXPECT_EQ(fixtures::snapshot_tree(out.path()), before);
}

TEST(Pipeline, ResumeRecomputesOnlyDeletedAsset) {
  TempDir out("resume");
  const auto catalog = dedup(load_catalog(kFixtures / "catalog.json"));
  ReplayClient client(kFixtures / "vlm");
  auto config = fixture_config(out.path());
  config.grid_resolution = 32;
  config.points_per_sample = 1024;
  const auto first = run_pipeline(catalog, config, client);
  std::filesystem::remove_all(out / "table");
  const auto calls = client.calls();
  const auto second = run_pipeline(catalog, config, client);
  EXPECT_EQ(second.recomputed, (std::vector<std::string>{"table"}));
  EXPECT_EQ(client.calls() - calls, 2u);
  EXPECT_EQ(to_json(second.manifest), to_json(first.manifest));
}

TEST(Pipeline, EdgeCasesRejectedWithReasons) {
  TempDir out("edge");
  const auto catalog = dedup(load_catalog(kFixtures / "edge_catalog.json"));
  ReplayClient client(kFixtures / "vlm");
  auto config = fixture_config(out.path());
  config.grid_resolution = 32;
  config.points_per_sample = 1024;
  const auto result = run_pipeline(catalog, config, client);
  EXPECT_EQ(result.manifest.assets.size() + result.rejections.entries.size(), catalog.size());
  const auto* chair = result.manifest.find("chair_dup");
  ASSERT_NE(chair, nullptr);
  EXPECT_EQ(cluster_map(*chair),
            (std::map<std::string, std::set<int>>{{"seat", {1}}, {"backrest", {2}}, {"legs", {3, 4, 5, 6}}}));
  const std::map<std::string, std::string> reasons{{"vase_all_in_one", "CollapsedStructure"},
                                                   {"blob_poor", "QualityGate"},
                                                   {"single_part", "TooFewParts"},
                                                   {"many_parts_33", "TooManyParts"}};
  for (const auto& [id, reason] : reasons) {
    ASSERT_TRUE(result.rejections.entries.contains(id)) << id;
    EXPECT_EQ(result.rejections.entries.at(id).reason, reason) << id;
  }
}

TEST(Pipeline, MissingReplayFixtureIsARejectionNotAFatal) {
  TempDir out("nofixture");
  TempDir empty("emptyvlm");
  const auto catalog = dedup(load_catalog(kFixtures / "catalog.json"));
  ReplayClient client(empty.path());
  auto config = fixture_config(out.path());
  config.grid_resolution = 16;
  const auto result = run_pipeline(catalog, config, client);
  EXPECT_TRUE(result.manifest.assets.empty());
  EXPECT_EQ(result.rejections.entries.size(), 3u);
  for (const auto& [id, r] : result.rejections.entries) EXPECT_EQ(r.reason, "VlmError") << id;
}

TEST(Pipeline, DuplicateIdsMustBeDeduplicatedFirst) {
  TempDir out("dups");
  ReplayClient client(kFixtures / "vlm");
  EXPECT_THROW(run_pipeline({entry("a", Provenance::Synthetic), entry("a", Provenance::Synthetic)},
                            fixture_config(out.path()), client),
               InvalidArgument);
}

TEST(Postprocess, OutOfRangeClusterIdThrows) {
  TempDir out("post");
  const auto asset = std::get<MultiPartAsset>(preprocess(fixtures::table()));
  Annotation ann;
  ann.asset_id = asset.asset_id;
  ann.clustering.clusters = {{"top", {1}}, {"ghost", {9}}};
  auto config = fixture_config(out.path());
  config.grid_resolution = 16;
  EXPECT_THROW(postprocess_asset(asset, ann, config), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Epoch emission

namespace {

struct EpochFixture {
  TempDir root{"epochs_root"};
  DatasetManifest manifest;
};

// Records whose point files are surface samples of fixture assets.
std::unique_ptr<EpochFixture> make_epoch_fixture(int count, std::size_t points) {
  auto f = std::make_unique<EpochFixture>();
  const auto assets = fixtures::eval_fixtures(count);
  for (std::size_t i = 0; i < assets.size(); ++i) {
    const auto normalized = normalize_to_unit_box(assets[i]).first;
    AssetRecord r;
    r.asset_id = "asset_" + std::to_string(i);
    for (std::size_t p = 0; p < std::min<std::size_t>(2, normalized.parts.size()); ++p) {
      const std::string file = r.asset_id + "/cluster_" + std::to_string(p) + ".pfpc";
      std::filesystem::create_directories(f->root / r.asset_id);
      write_pfpc(f->root / file, sample_surface(normalized.parts[p].mesh, points, 11 + i * 7 + p, false));
      r.clusters.push_back({"c" + std::to_string(p), {static_cast<int>(p) + 1}, "", file, 0});
    }
    r.full_points_file = r.asset_id + "/full.pfpc";
    write_pfpc(f->root / r.full_points_file, sample_surface(concat_parts(normalized), points, 5 + i, false));
    f->manifest.assets.push_back(std::move(r));
  }
  return f;
}

double min_pairwise(const std::vector<Vec3>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, oracle::sq(pts[i], pts[j]));
  }
  return std::sqrt(best);
}

}  // namespace

TEST(Epochs, FullCountKeepsEveryPoint) {
  const auto f = make_epoch_fixture(3, 300);
  TempDir out("epochs_full");
  EpochOptions o;
  o.points_per_sample = 300;
  o.validation_fraction = 0.0;
  emit_epochs(f->manifest, f->root.path(), out.path(), o);
  std::size_t checked = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(out.path())) {
    if (e.path().extension() != ".pfpc") continue;
    ++checked;
    const auto got = read_pfpc(e.path());
    const auto original = read_pfpc(f->root / e.path().parent_path().filename().string().substr(7) /
                                    e.path().filename());
    ASSERT_EQ(got.size(), original.size());
    auto key = [](const Vec3& v) { return std::array<double, 3>{v.x, v.y, v.z}; };
    std::multiset<std::array<double, 3>> a, b;
    for (const auto& p : got.points) a.insert(key(p));
    for (const auto& p : original.points) b.insert(key(p));
    EXPECT_EQ(a, b) << e.path();
  }
  EXPECT_EQ(checked, 9u);
}

TEST(Epochs, SameSeedSameFilesAndEpochsDiffer) {
  const auto f = make_epoch_fixture(6, 400);
  TempDir a("epochs_a"), b("epochs_b");
  EpochOptions o;
  o.epochs = 2;
  o.points_per_sample = 64;
  o.validation_fraction = 0.3;
  const auto sa = emit_epochs(f->manifest, f->root.path(), a.path(), o);
  const auto sb = emit_epochs(f->manifest, f->root.path(), b.path(), o);
  EXPECT_EQ(sa.epoch_orders, sb.epoch_orders);
  EXPECT_EQ(sa.validation_ids, sb.validation_ids);
  auto hashes = [](const TempDir& d) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& [k, v] : fixtures::snapshot_tree(d.path())) out[k] = v.first;
    return out;
  };
  EXPECT_EQ(hashes(a), hashes(b));
  EXPECT_EQ(sa.epoch_orders.size(), 2u);
  EXPECT_EQ(sa.epoch_orders[0].size() + sa.validation_ids.size(), 6u);
  std::set<std::string> e0(sa.epoch_orders[0].begin(), sa.epoch_orders[0].end());
  std::set<std::string> e1(sa.epoch_orders[1].begin(), sa.epoch_orders[1].end());
  EXPECT_EQ(e0, e1);
  for (const auto& v : sa.validation_ids) EXPECT_FALSE(e0.contains(v));
}

TEST(Epochs, InsufficientPointsThrows) {
  const auto f = make_epoch_fixture(1, 50);
  TempDir out("epochs_short");
  EpochOptions o;
  o.points_per_sample = 51;
  o.validation_fraction = 0.0;
  EXPECT_THROW(emit_epochs(f->manifest, f->root.path(), out.path(), o), InsufficientPoints);
}

TEST(Epochs, SubsampleSpreadBeatsUniformRandomOn50Fixtures) {
  const auto f = make_epoch_fixture(50, 1024);
  TempDir out("epochs_spread");
  EpochOptions o;
  o.points_per_sample = 128;
  o.validation_fraction = 0.0;
  emit_epochs(f->manifest, f->root.path(), out.path(), o);
  Rng rng(99);
  std::size_t compared = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(out / "epoch_000")) {
    if (e.path().filename() != "full.pfpc") continue;
    const auto fps = read_pfpc(e.path());
    const auto source = read_pfpc(f->root / e.path().parent_path().filename().string().substr(7) / "full.pfpc");
    std::vector<std::uint32_t> idx(source.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
    shuffle(idx, rng);
    idx.resize(fps.size());
    const auto uniform = select_points(source, idx);
    EXPECT_GE(min_pairwise(fps.points), min_pairwise(uniform.points)) << e.path();
    ++compared;
  }
  EXPECT_EQ(compared, 50u);
}

TEST(Validation, SplitIsAStableHashFraction) {
  std::size_t hits = 0;
  for (int i = 0; i < 10000; ++i) hits += is_validation("asset_" + std::to_string(i), 0.02);
  EXPECT_NEAR(static_cast<double>(hits) / 10000.0, 0.02, 0.006);
  EXPECT_FALSE(is_validation("anything", 0.0));
  EXPECT_TRUE(is_validation("anything", 1.0));
}
