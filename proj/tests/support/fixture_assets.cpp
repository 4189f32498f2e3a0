#include "fixture_assets.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "partforge/image.hpp"
#include "partforge/primitives.hpp"
#include "partforge/rng.hpp"

namespace partforge::fixtures {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

MultiPartAsset make(const std::string& id, std::vector<Part> parts) {
  MultiPartAsset a;
  a.asset_id = id;
  a.source = Source::Synthetic;
  a.parts = std::move(parts);
  return a;
}

Mesh leg(double x, double z, double half, double y0, double y1) {
  return make_box({x - half, y0, z - half}, {x + half, y1, z + half});
}

}  // namespace

MultiPartAsset toy_car() {
  std::vector<Part> parts;
  const double xs[2] = {-0.6, 0.6};
  const double zs[2] = {-0.55, 0.55};
  const char* names[4] = {"wheel_rear_left", "wheel_rear_right", "wheel_front_left", "wheel_front_right"};
  int k = 0;
  for (double x : xs) {
    for (double z : zs) {
      parts.push_back({names[k++], make_cylinder({x, 0.25, z}, 0.25, 0.15, 2, 32)});
    }
  }
  parts.push_back({"body", make_box({-1.0, 0.35, -0.5}, {1.0, 0.85, 0.5})});
  parts.push_back({"engine", make_box({-0.3, 0.45, -0.2}, {0.3, 0.75, 0.2})});
  auto a = make("toy_car", std::move(parts));
  a.global_caption = "A small toy car";
  return a;
}

MultiPartAsset table() {
  std::vector<Part> parts;
  parts.push_back({"top", make_box({-1.0, 0.9, -0.6}, {1.0, 1.0, 0.6})});
  int k = 0;
  for (double x : {-0.88, 0.88}) {
    for (double z : {-0.48, 0.48}) parts.push_back({"leg_" + std::to_string(++k), leg(x, z, 0.05, 0.0, 0.9)});
  }
  auto a = make("table", std::move(parts));
  a.global_caption = "A wooden table";
  return a;
}

MultiPartAsset lamp() {
  std::vector<Part> parts;
  parts.push_back({"base", make_cylinder({0.0, 0.05, 0.0}, 0.5, 0.1, 1, 32)});
  parts.push_back({"pole", make_cylinder({0.0, 0.8, 0.0}, 0.04, 1.5, 1, 16)});
  parts.push_back({"shade", make_open_cone({0.0, 1.3, 0.0}, 0.5, 0.5, 32)});
  parts.push_back({"bulb", make_uv_sphere({0.0, 1.42, 0.0}, 0.12, 24, 12)});
  auto a = make("lamp", std::move(parts));
  a.global_caption = "A desk lamp";
  return a;
}

MultiPartAsset chair() {
  std::vector<Part> parts;
  parts.push_back({"seat", make_box({-0.5, 0.45, -0.5}, {0.5, 0.55, 0.5})});
  parts.push_back({"back", make_box({-0.5, 0.55, 0.4}, {0.5, 1.3, 0.5})});
  int k = 0;
  for (double x : {-0.44, 0.44}) {
    for (double z : {-0.44, 0.44}) parts.push_back({"leg_" + std::to_string(++k), leg(x, z, 0.05, 0.0, 0.45)});
  }
  return make("chair_dup", std::move(parts));
}

MultiPartAsset vase() {
  std::vector<Part> parts;
  parts.push_back({"body", make_uv_sphere({0.0, 0.5, 0.0}, 0.5, 32, 16)});
  parts.push_back({"neck", make_cylinder({0.0, 1.1, 0.0}, 0.15, 0.3, 1, 24)});
  parts.push_back({"lip", make_cylinder({0.0, 1.28, 0.0}, 0.22, 0.06, 1, 24)});
  return make("vase_all_in_one", std::move(parts));
}

MultiPartAsset single_part() {
  return make("single_part", {{"block", make_box({-0.5, -0.3, -0.4}, {0.5, 0.3, 0.4})}});
}

MultiPartAsset many_parts(int n) {
  std::vector<Part> parts;
  const int side = 6;
  for (int i = 0; i < n; ++i) {
    const double x = (i % side) * 0.5;
    const double z = ((i / side) % side) * 0.5;
    const double y = (i / (side * side)) * 0.5;
    char name[32];
    std::snprintf(name, sizeof(name), "block_%02d", i + 1);
    parts.push_back({name, make_box({x, y, z}, {x + 0.3, y + 0.3, z + 0.3})});
  }
  return make("many_parts_" + std::to_string(n), std::move(parts));
}

MultiPartAsset blob() {
  std::vector<Part> parts;
  parts.push_back({"lump_a", make_box({-0.6, 0.0, -0.4}, {0.2, 0.7, 0.4})});
  parts.push_back({"lump_b", make_box({-0.1, 0.2, -0.3}, {0.7, 0.9, 0.3})});
  parts.push_back({"knob", make_uv_sphere({0.3, 1.0, 0.0}, 0.2, 24, 12)});
  return make("blob_poor", std::move(parts));
}

std::vector<MultiPartAsset> eval_fixtures(int count) {
  std::vector<MultiPartAsset> out = {toy_car(), table(), lamp(), chair(), vase(), blob()};
  Rng rng(20240611);
  for (int i = static_cast<int>(out.size()); i < count; ++i) {
    const int n = 2 + static_cast<int>(rng.below(5));
    std::vector<Part> parts;
    for (int p = 0; p < n; ++p) {
      const Vec3 c{rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0};
      const double s = 0.15 + 0.35 * rng.uniform();
      Mesh m;
      switch (rng.below(3)) {
        case 0: m = make_box(c - Vec3{s, 0.6 * s, 0.8 * s}, c + Vec3{s, 0.6 * s, 0.8 * s}); break;
        case 1: m = make_uv_sphere(c, s, 20, 10); break;
        default: m = make_cylinder(c, 0.5 * s, 2.0 * s, static_cast<int>(rng.below(3)), 20); break;
      }
      parts.push_back({"p" + std::to_string(p), std::move(m)});
    }
    out.push_back(make("random_" + std::to_string(i), std::move(parts)));
  }
  out.resize(static_cast<std::size_t>(count));
  return out;
}

std::vector<std::pair<std::string, Mesh>> watertight_meshes() {
  auto merged = [](std::vector<Mesh> parts) {
    std::vector<const Mesh*> ptrs;
    for (const auto& m : parts) ptrs.push_back(&m);
    return concat_meshes(ptrs);
  };
  return {
      {"sphere_r08", make_uv_sphere({0.0, 0.0, 0.0}, 0.8, 64, 32)},
      {"box", make_box({-0.7, -0.4, -0.5}, {0.7, 0.4, 0.5})},
      {"thin_slab", make_box({-0.8, -0.05, -0.8}, {0.8, 0.05, 0.8})},
      {"cylinder", make_cylinder({0.0, 0.0, 0.0}, 0.4, 1.4, 1, 32)},
      {"open_cone", make_open_cone({0.0, -0.5, 0.0}, 0.6, 1.0, 32)},
      {"single_quad", make_quad({-0.6, 0.0, -0.6}, {0.6, 0.0, -0.6}, {0.6, 0.0, 0.6}, {-0.6, 0.0, 0.6})},
      {"toy_car", concat_parts(toy_car())},
      {"table", concat_parts(table())},
      {"lamp", concat_parts(lamp())},
      {"two_spheres", merged({make_uv_sphere({-0.45, 0.0, 0.0}, 0.4, 32, 16),
                              make_uv_sphere({0.45, 0.0, 0.0}, 0.4, 32, 16)})},
  };
}

std::string chat_body(const std::string& content) {
  const json body{{"id", "fixture"},
                  {"object", "chat.completion"},
                  {"choices", json::array({{{"index", 0},
                                            {"message", {{"role", "assistant"}, {"content", content}}},
                                            {"finish_reason", "stop"}}})}};
  return body.dump(2) + "\n";
}

namespace {

std::string quality_reply(const std::string& score, const std::string& tags, const std::string& description) {
  return "{\n  \"tags\": [" + tags +
         "],\n  \"geometric complexity\": \"moderate\",\n  \"texture complexity\": \"poor\",\n"
         "  \"reasoning\": \"Clean synthetic geometry with separable parts.\",\n  \"score\": \"" +
         score + "\",\n  \"description\": \"" + description + "\"\n}";
}

}  // namespace

std::vector<FixtureSpec> bundled_fixtures() {
  std::vector<FixtureSpec> out;
  out.push_back({toy_car(), quality_reply("excellent", "", "A toy car with four wheels."),
                 R"({
  "semantic_clusters": [
    {"cluster_name": "wheels", "part_ids": [1, 2, 3, 4]},
    {"cluster_name": "body", "part_ids": [5]}
  ]
})"});
  out.push_back({table(), "```json\n" + quality_reply("moderate", "", "A rectangular table.") + "\n```",
                 R"(Here is the grouping:
{
  "semantic_clusters": [
    {"cluster_name": "tabletop", "part_ids": [1]},
    {"cluster_name": "legs", "part_ids": [2, 3, 4, 5]},
  ]
})"});
  out.push_back({lamp(), quality_reply("excellent", "", "A desk lamp with a conical shade."),
                 "```json\n" R"({
  "semantic_clusters": [
    {"cluster_name": "base", "part_ids": [1]},
    {"cluster_name": "pole", "part_ids": ["2"]},
    {"cluster_name": "lampshade", "part_ids": [3, 4]}
  ]
})" "\n```"});
  out.push_back({chair(), quality_reply("moderate", "", "A simple chair."),
                 R"({
  "semantic_clusters": [
    {"cluster_name": "legs", "part_ids": [3, 4, 5, 6]},
    {"cluster_name": "seat", "part_ids": [1]},
    {"cluster_name": "backrest", "part_ids": [2, 3, 1]}
  ]
})"});
  out.push_back({vase(), quality_reply("excellent", "", "A round vase."),
                 R"({"semantic_clusters": [{"cluster_name": "vase", "part_ids": [1, 2, 3]}]})"});
  out.push_back({blob(), quality_reply("poor", "\"no recognizable object\", \"fragmented object\"", "Shapeless lumps."),
                 ""});
  out.push_back({single_part(), "", ""});
  out.push_back({many_parts(33), "", ""});
  return out;
}

void write_bundled_fixtures(const fs::path& root) {
  const auto fixtures = bundled_fixtures();
  json main_catalog = json::array();
  json edge_catalog = json::array();
  for (std::size_t i = 0; i < fixtures.size(); ++i) {
    const auto& f = fixtures[i];
    const auto& id = f.asset.asset_id;
    save_asset(f.asset, root / "assets" / id);
    if (!f.filter_content.empty()) {
      write_file_if_changed(root / "vlm" / (id + ".filter.json"), chat_body(f.filter_content));
    }
    if (!f.cluster_content.empty()) {
      write_file_if_changed(root / "vlm" / (id + ".cluster.json"), chat_body(f.cluster_content));
    }
    const json entry{{"asset_id", id},
                     {"source", to_string(f.asset.source)},
                     {"provenance", "synthetic"},
                     {"path", "assets/" + id}};
    (i < 3 ? main_catalog : edge_catalog).push_back(entry);
  }
  write_file_if_changed(root / "catalog.json", json{{"assets", main_catalog}}.dump(2) + "\n");
  write_file_if_changed(root / "edge_catalog.json", json{{"assets", edge_catalog}}.dump(2) + "\n");
  write_file_if_changed(root / "schema_car.json", json{{"parts", {"wheels", "body", "engine"}}}.dump(2) + "\n");
  write_file_if_changed(root / "config.toml",
                        "[vlm]\nmode = \"replay\"\nfixtures_dir = \"vlm\"\n\n"
                        "[geometry]\ngrid_resolution = 64\n\n[sampling]\npoints_per_sample = 8192\n");
}

}  // namespace partforge::fixtures
