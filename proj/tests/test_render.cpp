#include <gtest/gtest.h>

#include <cmath>

#include "fixture_assets.hpp"
#include "oracles.hpp"
#include "partforge/errors.hpp"
#include "partforge/geometry.hpp"
#include "partforge/image.hpp"
#include "partforge/primitives.hpp"
#include "partforge/render.hpp"
#include "temp_dir.hpp"

using namespace partforge;

namespace {

MultiPartAsset normalized(const MultiPartAsset& a) { return normalize_to_unit_box(a).first; }

SomOptions small() {
  SomOptions o;
  o.image_size = 256;
  return o;
}

Camera front_camera(int size = 128) { return build_camera_rig(RigMode::Annotate14, 4.0, size).front(); }

IdBuffer mask_buffer(int w, int h, const std::vector<std::uint8_t>& mask) {
  IdBuffer b;
  b.width = w;
  b.height = h;
  b.ids.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) b.ids[i] = mask[i] ? 0 : -1;
  return b;
}

}  // namespace

TEST(Rig, CountsNamesAndRadius) {
  const auto a = build_camera_rig(RigMode::Annotate14, 4.0);
  const auto f = build_camera_rig(RigMode::Filter8, 4.0);
  ASSERT_EQ(a.size(), 14u);
  ASSERT_EQ(f.size(), 8u);
  std::set<std::string> names;
  for (const auto& c : a) {
    names.insert(c.name);
    EXPECT_NEAR(std::sqrt(squared_norm(c.position)), 4.0, 1e-12);
    EXPECT_EQ(squared_norm(c.look_at), 0.0);
    EXPECT_NO_THROW(validate_camera(c));
  }
  EXPECT_EQ(names.size(), 14u);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(f[i].name, a[i].name);
  const auto again = build_camera_rig(RigMode::Annotate14, 4.0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(again[i].name, a[i].name);
  EXPECT_THROW(build_camera_rig(RigMode::Filter8, 1.0), InvalidArgument);
}

TEST(Camera, Validation) {
  Camera c;
  c.position = {0, 0, 0};
  EXPECT_THROW(validate_camera(c), InvalidArgument);
  c.position = {0, 3, 0};
  c.up = {0, 1, 0};
  EXPECT_THROW(validate_camera(c), InvalidArgument);
}

TEST(Palette, PairwiseLabDistanceAtLeast25) {
  for (std::size_t n : {2u, 8u, 16u, 32u}) {
    const auto p = make_palette(n);
    ASSERT_EQ(p.colors.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) EXPECT_GE(lab_distance(p.colors[i], p.colors[j]), kMinPaletteLabDistance);
    }
  }
  EXPECT_EQ(make_palette(32).colors[5], make_palette(32).colors[5]);
}

TEST(Rasterize, SingleCubeFrontView) {
  MultiPartAsset a;
  a.parts = {{"cube", make_box({-1, -1, -1}, {1, 1, 1})}};
  const auto r = rasterize(a, front_camera(), RenderStyle::PartColored, make_palette(1));
  EXPECT_EQ(r.id_buffer.visible_ids(), (std::set<int>{0}));
}

TEST(Rasterize, OccludedPartIsInvisible) {
  // The back box sits directly behind the front box as seen from the front camera.
  const auto cam = front_camera();
  const Vec3 dir = cam.position * (1.0 / std::sqrt(squared_norm(cam.position)));
  MultiPartAsset a;
  a.parts = {{"front", make_box(dir * 0.5 - Vec3{0.6, 0.6, 0.6}, dir * 0.5 + Vec3{0.6, 0.6, 0.6})},
             {"back", make_box(dir * -0.6 - Vec3{0.1, 0.1, 0.1}, dir * -0.6 + Vec3{0.1, 0.1, 0.1})}};
  const auto r = rasterize(a, cam, RenderStyle::PartColored, make_palette(2));
  EXPECT_EQ(r.id_buffer.visible_ids(), (std::set<int>{0}));
}

TEST(Rasterize, EmptyRenderThrows) {
  MultiPartAsset a;
  a.parts = {{"far", make_box({50, 50, 50}, {51, 51, 51})}};
  EXPECT_THROW(rasterize(a, front_camera(), RenderStyle::Textured, make_palette(1)), EmptyRender);
}

TEST(Rasterize, Deterministic) {
  const auto car = normalized(fixtures::toy_car());
  const auto cam = front_camera(200);
  const auto a = rasterize(car, cam, RenderStyle::Textured, make_palette(6));
  const auto b = rasterize(car, cam, RenderStyle::Textured, make_palette(6));
  EXPECT_EQ(encode_png(a.image), encode_png(b.image));
  EXPECT_EQ(a.id_buffer, b.id_buffer);
}

TEST(Marker, FullFrameSquareIsCentred) {
  const int n = 33;
  const auto b = mask_buffer(n, n, std::vector<std::uint8_t>(n * n, 1));
  const auto p = place_marker(b, 0);
  ASSERT_TRUE(p);
  EXPECT_EQ(*p, (Pixel{16, 16}));
  EXPECT_FALSE(place_marker(b, 3));
}

TEST(Marker, LShapeMatchesBruteForce) {
  const int w = 64, h = 64;
  std::vector<std::uint8_t> mask(w * h, 0);
  for (int y = 4; y < 60; ++y) {
    for (int x = 6; x < 58; ++x) {
      const bool vertical = x < 26;
      const bool horizontal = y >= 40;
      if (vertical || horizontal) mask[y * w + x] = 1;
    }
  }
  const auto brute = oracle::edt(w, h, mask);
  EXPECT_EQ(squared_distance_to_boundary(w, h, mask), brute);
  std::int64_t best = -1;
  Pixel arg;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask[y * w + x] && brute[y * w + x] > best) {
        best = brute[y * w + x];
        arg = {x, y};
      }
    }
  }
  const auto got = place_marker(mask_buffer(w, h, mask), 0);
  ASSERT_TRUE(got);
  EXPECT_EQ(*got, arg);
}

TEST(Marker, EdtMatchesBruteForceOnRandomMasks) {
  Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    const int w = 20 + static_cast<int>(rng.below(20)), h = 20 + static_cast<int>(rng.below(20));
    std::vector<std::uint8_t> mask(w * h);
    for (auto& m : mask) m = rng.uniform() < 0.8 ? 1 : 0;
    EXPECT_EQ(squared_distance_to_boundary(w, h, mask), oracle::edt(w, h, mask));
  }
}

TEST(SomPairs, CarPairsMarkersAndColours) {
  const auto car = normalized(fixtures::toy_car());
  const auto pairs = render_som_pairs(car, small());
  ASSERT_EQ(pairs.size(), 14u);
  const auto palette = make_palette(car.parts.size());
  for (const auto& p : pairs) {
    EXPECT_EQ(p.visible_part_ids, p.id_buffer.visible_ids());
    for (std::size_t m = 0; m < p.markers.size(); ++m) {
      const auto [id, at] = p.markers[m];
      EXPECT_TRUE(p.visible_part_ids.count(id));
      const int x = at.x;
      const int y = at.y + 10;
      if (!p.colored_image.contains(x, y)) continue;
      bool covered_later = false;
      for (std::size_t k = m + 1; k < p.markers.size(); ++k) {
        const auto o = p.markers[k].second;
        if ((o.x - x) * (o.x - x) + (o.y - y) * (o.y - y) <= 17 * 17) covered_later = true;
      }
      if (covered_later) continue;
      const auto c = palette.colors[id];
      const Rgba expect{c[0], c[1], c[2], 255};
      EXPECT_EQ(p.colored_image.at(x, y), expect) << p.view_name << " part " << id;
      EXPECT_EQ(p.textured_image.at(x, y), expect) << p.view_name << " part " << id;
    }
    // Colored image: pixels deep inside a part mask carry its solid colour.
    for (int y = 2; y < p.id_buffer.height - 2; y += 5) {
      for (int x = 2; x < p.id_buffer.width - 2; x += 5) {
        const int id = p.id_buffer.at(x, y);
        if (id < 0) continue;
        bool interior = true;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) interior = interior && p.id_buffer.at(x + dx, y + dy) == id;
        }
        bool near_marker = false;
        for (const auto& [mid, mat] : p.markers) {
          if ((mat.x - x) * (mat.x - x) + (mat.y - y) * (mat.y - y) <= 17 * 17) near_marker = true;
        }
        if (!interior || near_marker) continue;
        const auto c = palette.colors[id];
        EXPECT_EQ(p.colored_image.at(x, y), (Rgba{c[0], c[1], c[2], 255}));
      }
    }
  }
  // The sealed engine (index 5) never shows.
  EXPECT_EQ(visible_union(pairs), (std::set<int>{0, 1, 2, 3, 4}));
}

TEST(SomPairs, ByteIdenticalAcrossRunsAndWrittenFiles) {
  const auto lamp = normalized(fixtures::lamp());
  const auto a = render_som_pairs(lamp, small());
  const auto b = render_som_pairs(lamp, small());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(encode_png(a[i].textured_image), encode_png(b[i].textured_image));
    EXPECT_EQ(encode_png(a[i].colored_image), encode_png(b[i].colored_image));
  }
  fixtures::TempDir dir("som");
  write_render_pairs(a, dir.path(), true);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 14u * 3u);
  const auto back = read_png(dir / (a[0].view_name + "_colored.png"));
  EXPECT_EQ(back, a[0].colored_image);
}

TEST(SomPairs, PartWindow) {
  MultiPartAsset one;
  one.parts = {{"a", make_box({-1, -1, -1}, {1, 1, 1})}};
  EXPECT_THROW(render_som_pairs(one, small()), InvalidArgument);
}

TEST(FilterViews, EightPlainViews) {
  const auto views = render_filter_views(normalized(fixtures::table()), small());
  ASSERT_EQ(views.size(), 8u);
  const auto rig = build_camera_rig(RigMode::Filter8);
  for (std::size_t i = 0; i < views.size(); ++i) EXPECT_EQ(views[i].view_name, rig[i].name);
}

TEST(Png, EncodeDecodeRoundTrip) {
  Image img(7, 5, {1, 2, 3, 255});
  img.set(3, 2, {200, 100, 50, 128});
  const auto bytes = encode_png(img);
  EXPECT_EQ(decode_png(bytes), img);
  EXPECT_EQ(encode_png(img), bytes);
}
