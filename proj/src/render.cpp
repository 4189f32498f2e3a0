#include "partforge/render.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "partforge/errors.hpp"

namespace partforge {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

void validate_camera(const Camera& camera) {
  const Vec3 view = camera.look_at - camera.position;
  if (squared_norm(view) == 0.0) throw InvalidArgument("camera '" + camera.name + "' position equals look_at");
  if (squared_norm(cross(normalized(view), normalized(camera.up))) < 1e-12) {
    throw InvalidArgument("camera '" + camera.name + "' up vector is parallel to the view direction");
  }
  if (camera.image_size <= 0) throw InvalidArgument("camera image size must be positive");
  if (!(camera.vertical_fov > 0.0 && camera.vertical_fov < 180.0)) throw InvalidArgument("bad field of view");
}

std::vector<Camera> build_camera_rig(RigMode mode, double radius, int image_size) {
  if (!(radius > kUnitBoxRadius)) throw InvalidArgument("rig radius must exceed the unit box bounding radius");
  const double fov = 2.0 * std::asin(kUnitBoxRadius / radius) / kDeg * 1.1;
  struct View {
    const char* name;
    double azimuth, elevation;
  };
  static constexpr View kRing[] = {
      {"front", 0, 25},      {"front_right", 45, 25}, {"right", 90, 25}, {"back_right", 135, 25},
      {"back", 180, 25},     {"back_left", 225, 25},  {"left", 270, 25}, {"front_left", 315, 25},
  };
  static constexpr View kExtra[] = {
      {"front_tilt_bottom", 0, -20}, {"right_tilt_bottom", 90, -20}, {"back_tilt_bottom", 180, -20},
      {"left_tilt_bottom", 270, -20}, {"top", 0, 90},               {"front_tilt_top", 0, 55},
  };
  std::vector<Camera> rig;
  auto add = [&](const View& v) {
    Camera c;
    c.name = v.name;
    c.look_at = {0, 0, 0};
    c.vertical_fov = fov;
    c.image_size = image_size;
    if (v.elevation == 90) {
      c.position = {0, radius, 0};
      c.up = {0, 0, -1};
    } else {
      const double az = v.azimuth * kDeg, el = v.elevation * kDeg;
      const Vec3 dir{std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)};
      c.position = normalized(dir) * radius;
      c.up = {0, 1, 0};
    }
    rig.push_back(std::move(c));
  };
  for (const auto& v : kRing) add(v);
  if (mode == RigMode::Annotate14) {
    for (const auto& v : kExtra) add(v);
  }
  return rig;
}

// ---------------------------------------------------------------------------
// Palette

std::array<double, 3> srgb_to_lab(Rgb c) {
  auto lin = [](std::uint8_t v) {
    const double s = v / 255.0;
    return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
  };
  const double r = lin(c[0]), g = lin(c[1]), b = lin(c[2]);
  const double x = (0.412453 * r + 0.357580 * g + 0.180423 * b) / 0.95047;
  const double y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
  const double z = (0.019334 * r + 0.119193 * g + 0.950227 * b) / 1.08883;
  auto f = [](double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double lab_distance(Rgb a, Rgb b) {
  const auto la = srgb_to_lab(a), lb = srgb_to_lab(b);
  return std::sqrt((la[0] - lb[0]) * (la[0] - lb[0]) + (la[1] - lb[1]) * (la[1] - lb[1]) +
                   (la[2] - lb[2]) * (la[2] - lb[2]));
}

namespace {

// Farthest-point selection in Lab over a 16^3 sRGB lattice, skipping colours
// close to the white background and the dark ink.
std::vector<Rgb> palette_sequence(std::size_t count) {
  std::vector<Rgb> cand;
  std::vector<std::array<double, 3>> lab;
  const auto white = srgb_to_lab(kBackground);
  const auto ink = srgb_to_lab({26, 26, 26});
  auto dist = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
  };
  for (int r = 0; r < 16; ++r) {
    for (int g = 0; g < 16; ++g) {
      for (int b = 0; b < 16; ++b) {
        const Rgb c{static_cast<std::uint8_t>(r * 17), static_cast<std::uint8_t>(g * 17),
                    static_cast<std::uint8_t>(b * 17)};
        const auto l = srgb_to_lab(c);
        if (dist(l, white) < 30.0 || dist(l, ink) < 30.0) continue;
        cand.push_back(c);
        lab.push_back(l);
      }
    }
  }
  std::size_t current = 0;
  int best_rgb = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const int d = (cand[i][0] - 230) * (cand[i][0] - 230) + (cand[i][1] - 25) * (cand[i][1] - 25) +
                  (cand[i][2] - 25) * (cand[i][2] - 25);
    if (d < best_rgb) {
      best_rgb = d;
      current = i;
    }
  }
  std::vector<double> mind(cand.size(), std::numeric_limits<double>::infinity());
  std::vector<Rgb> out;
  while (out.size() < count && out.size() < cand.size()) {
    out.push_back(cand[current]);
    mind[current] = -1.0;
    std::size_t next = 0;
    double best = -2.0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (mind[i] < 0.0) continue;
      mind[i] = std::min(mind[i], dist(lab[i], lab[current]));
      if (mind[i] > best) {
        best = mind[i];
        next = i;
      }
    }
    current = next;
  }
  return out;
}

}  // namespace

Palette make_palette(std::size_t part_count) {
  static const std::vector<Rgb> base = palette_sequence(kMaxPaletteSize);
  if (part_count <= base.size()) return {std::vector<Rgb>(base.begin(), base.begin() + part_count)};
  return {palette_sequence(part_count)};
}

// ---------------------------------------------------------------------------
// Rasterization

std::set<int> IdBuffer::visible_ids() const {
  std::set<int> out;
  for (auto id : ids) {
    if (id >= 0) out.insert(id);
  }
  return out;
}

namespace {

constexpr int kSubpixelBits = 8;
constexpr std::int64_t kSubpixel = 1 << kSubpixelBits;

struct ScreenVertex {
  std::int64_t x, y;  // fixed-point pixel coordinates
  double inv_z;
  Vec3 world;
};

struct View {
  Vec3 eye, right, up, forward;
  double focal;
  int size;
};

View make_view(const Camera& cam) {
  validate_camera(cam);
  View v;
  v.eye = cam.position;
  v.forward = normalized(cam.look_at - cam.position);
  v.right = normalized(cross(v.forward, cam.up));
  v.up = cross(v.right, v.forward);
  v.size = cam.image_size;
  v.focal = 0.5 * cam.image_size / std::tan(0.5 * cam.vertical_fov * kDeg);
  return v;
}

std::int64_t edge(const ScreenVertex& a, const ScreenVertex& b, std::int64_t px, std::int64_t py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

bool top_left(const ScreenVertex& a, const ScreenVertex& b) {
  const auto dx = b.x - a.x, dy = b.y - a.y;
  return dy > 0 || (dy == 0 && dx < 0);
}

Rgb textured_base(const Rgb& part_color) {
  constexpr double keep = 0.35;
  constexpr std::array<double, 3> grey{210, 205, 195};
  Rgb out{};
  for (int i = 0; i < 3; ++i) out[i] = static_cast<std::uint8_t>(std::lround(keep * part_color[i] + (1 - keep) * grey[i]));
  return out;
}

}  // namespace

Rendered rasterize(const MultiPartAsset& asset, const Camera& camera, RenderStyle style, const Palette& palette) {
  if (palette.colors.size() < asset.parts.size()) throw InvalidArgument("palette smaller than part count");
  const View view = make_view(camera);
  const int size = view.size;
  Rendered out;
  out.image = Image(size, size, {kBackground[0], kBackground[1], kBackground[2], 255});
  out.id_buffer = {size, size, std::vector<std::int32_t>(static_cast<std::size_t>(size) * size, -1)};
  std::vector<double> depth(static_cast<std::size_t>(size) * size, std::numeric_limits<double>::infinity());
  const Vec3 to_light = normalized(view.forward * -0.8 + view.up * 0.5 - view.right * 0.3);
  constexpr double kNear = 1e-3;

  for (std::size_t pi = 0; pi < asset.parts.size(); ++pi) {
    const Mesh& mesh = asset.parts[pi].mesh;
    const Rgb solid = palette.colors[pi];
    const Rgb base = textured_base(solid);
    const bool use_texture = style == RenderStyle::Textured && mesh.texture && mesh.has_uvs() &&
                             mesh.texture->width > 0 && mesh.texture->height > 0;
    std::vector<ScreenVertex> sv(mesh.vertices.size());
    std::vector<char> usable(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const Vec3 rel = mesh.vertices[i] - view.eye;
      const double cx = dot(rel, view.right), cy = dot(rel, view.up), cz = dot(rel, view.forward);
      usable[i] = cz > kNear ? 1 : 0;
      if (!usable[i]) continue;
      const double sx = 0.5 * size + view.focal * cx / cz;
      const double sy = 0.5 * size - view.focal * cy / cz;
      sv[i] = {std::llround(sx * kSubpixel), std::llround(sy * kSubpixel), 1.0 / cz, mesh.vertices[i]};
    }
    for (const auto& f : mesh.faces) {
      if (!usable[f[0]] || !usable[f[1]] || !usable[f[2]]) continue;
      std::array<std::uint32_t, 3> idx{f[0], f[1], f[2]};
      std::int64_t area = edge(sv[idx[0]], sv[idx[1]], sv[idx[2]].x, sv[idx[2]].y);
      if (area == 0) continue;
      if (area < 0) {
        std::swap(idx[1], idx[2]);
        area = -area;
      }
      const auto &a = sv[idx[0]], &b = sv[idx[1]], &c = sv[idx[2]];
      const std::int64_t minx = std::max<std::int64_t>(0, std::min({a.x, b.x, c.x}) / kSubpixel - 1);
      const std::int64_t maxx = std::min<std::int64_t>(size - 1, std::max({a.x, b.x, c.x}) / kSubpixel + 1);
      const std::int64_t miny = std::max<std::int64_t>(0, std::min({a.y, b.y, c.y}) / kSubpixel - 1);
      const std::int64_t maxy = std::min<std::int64_t>(size - 1, std::max({a.y, b.y, c.y}) / kSubpixel + 1);
      if (minx > maxx || miny > maxy) continue;

      const Vec3 n = normalized(cross(b.world - a.world, c.world - a.world));
      const double shade = 0.3 + 0.7 * std::abs(dot(n, to_light));
      const bool tl0 = top_left(b, c), tl1 = top_left(c, a), tl2 = top_left(a, b);
      for (std::int64_t py = miny; py <= maxy; ++py) {
        const std::int64_t sy = py * kSubpixel + kSubpixel / 2;
        for (std::int64_t px = minx; px <= maxx; ++px) {
          const std::int64_t sx = px * kSubpixel + kSubpixel / 2;
          const std::int64_t w0 = edge(b, c, sx, sy), w1 = edge(c, a, sx, sy), w2 = edge(a, b, sx, sy);
          if (w0 < 0 || w1 < 0 || w2 < 0) continue;
          if ((w0 == 0 && !tl0) || (w1 == 0 && !tl1) || (w2 == 0 && !tl2)) continue;
          const double l0 = static_cast<double>(w0) / area, l1 = static_cast<double>(w1) / area,
                       l2 = static_cast<double>(w2) / area;
          const double inv_z = l0 * a.inv_z + l1 * b.inv_z + l2 * c.inv_z;
          const double z = 1.0 / inv_z;
          const auto pix = static_cast<std::size_t>(py) * size + static_cast<std::size_t>(px);
          if (!(z < depth[pix])) continue;
          depth[pix] = z;
          out.id_buffer.ids[pix] = static_cast<std::int32_t>(pi);
          Rgb color = solid;
          if (style == RenderStyle::Textured) {
            Rgb src = base;
            if (use_texture) {
              // Perspective-correct UV interpolation.
              const Vec2 ta = mesh.uvs[idx[0]], tb = mesh.uvs[idx[1]], tc = mesh.uvs[idx[2]];
              const double u = (l0 * ta.u * a.inv_z + l1 * tb.u * b.inv_z + l2 * tc.u * c.inv_z) * z;
              const double v = (l0 * ta.v * a.inv_z + l1 * tb.v * b.inv_z + l2 * tc.v * c.inv_z) * z;
              const auto& tex = *mesh.texture;
              const double uu = u - std::floor(u), vv = v - std::floor(v);
              const int tx = std::clamp(static_cast<int>(uu * tex.width), 0, tex.width - 1);
              const int ty = std::clamp(static_cast<int>((1.0 - vv) * tex.height), 0, tex.height - 1);
              const Rgba t = tex.at(tx, ty);
              src = {t[0], t[1], t[2]};
            }
            for (int ch = 0; ch < 3; ++ch) color[ch] = static_cast<std::uint8_t>(std::lround(src[ch] * shade));
          }
          out.image.set(static_cast<int>(px), static_cast<int>(py), {color[0], color[1], color[2], 255});
        }
      }
    }
  }
  if (std::all_of(out.id_buffer.ids.begin(), out.id_buffer.ids.end(), [](std::int32_t id) { return id < 0; })) {
    throw EmptyRender("view '" + camera.name + "' covers no pixel of asset '" + asset.asset_id + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance transform and marker placement

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

// Felzenszwalb-Huttenlocher 1D squared distance transform, in place.
void dt1d(std::vector<std::int64_t>& f, std::size_t offset, std::size_t stride, int n, std::vector<std::int64_t>& d,
          std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto fv = [&](int q) { return f[offset + static_cast<std::size_t>(q) * stride]; };
  for (int q = 1; q < n; ++q) {
    if (fv(q) >= kInf) continue;
    if (fv(v[k]) >= kInf) {
      v[k] = q;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = (static_cast<double>(fv(q) + static_cast<std::int64_t>(q) * q) -
           static_cast<double>(fv(p) + static_cast<std::int64_t>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      v[k] = q;
    } else {
      ++k;
      v[k] = q;
      z[k] = s;
    }
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (fv(v[0]) >= kInf) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
  } else {
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      const std::int64_t diff = q - v[k];
      d[q] = diff * diff + fv(v[k]);
    }
  }
  for (int q = 0; q < n; ++q) f[offset + static_cast<std::size_t>(q) * stride] = d[q];
}

// EDT over a w x h grid where `zero` cells are sources.
void edt2d(std::vector<std::int64_t>& g, int w, int h) {
  const int m = std::max(w, h);
  std::vector<std::int64_t> d(m);
  std::vector<int> v(m);
  std::vector<double> z(m + 1);
  for (int x = 0; x < w; ++x) dt1d(g, x, w, h, d, v, z);
  for (int y = 0; y < h; ++y) dt1d(g, static_cast<std::size_t>(y) * w, 1, w, d, v, z);
}

}  // namespace

std::vector<std::int64_t> squared_distance_to_boundary(int width, int height, const std::vector<std::uint8_t>& mask) {
  const int pw = width + 2, ph = height + 2;
  std::vector<std::int64_t> g(static_cast<std::size_t>(pw) * ph, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (mask[static_cast<std::size_t>(y) * width + x]) g[static_cast<std::size_t>(y + 1) * pw + x + 1] = kInf;
    }
  }
  edt2d(g, pw, ph);
  std::vector<std::int64_t> out(static_cast<std::size_t>(width) * height, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (mask[static_cast<std::size_t>(y) * width + x]) {
        out[static_cast<std::size_t>(y) * width + x] = g[static_cast<std::size_t>(y + 1) * pw + x + 1];
      }
    }
  }
  return out;
}

std::optional<Pixel> place_marker(const IdBuffer& ids, int part_id) {
  int x0 = ids.width, y0 = ids.height, x1 = -1, y1 = -1;
  for (int y = 0; y < ids.height; ++y) {
    for (int x = 0; x < ids.width; ++x) {
      if (ids.at(x, y) != part_id) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  // The bounding box plus a one-pixel ring of non-mask cells is enough for an
  // exact transform: any farther source is dominated by a ring cell.
  const int w = x1 - x0 + 3, h = y1 - y0 + 3;
  std::vector<std::int64_t> g(static_cast<std::size_t>(w) * h, 0);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (ids.at(x, y) == part_id) g[static_cast<std::size_t>(y - y0 + 1) * w + (x - x0 + 1)] = kInf;
    }
  }
  edt2d(g, w, h);
  Pixel best{};
  std::int64_t best_d = -1;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (ids.at(x, y) != part_id) continue;
      const auto d = g[static_cast<std::size_t>(y - y0 + 1) * w + (x - x0 + 1)];
      if (d > best_d) {  // row-major scan keeps the topmost-then-leftmost tie
        best_d = d;
        best = {x, y};
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Set-of-Mark overlays

namespace {

// 5x7 digit glyphs, one row per byte (low 5 bits, MSB on the left).
constexpr std::uint8_t kDigits[10][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
};
constexpr int kGlyphScale = 2;

void draw_contours(Image& img, const IdBuffer& ids, int width, const Palette* palette, Rgb ink) {
  const int w = ids.width, h = ids.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = ids.at(x, y);
      if (id < 0) continue;
      bool edge_pixel = false;
      for (int dy = -width; dy <= width && !edge_pixel; ++dy) {
        for (int dx = -width; dx <= width && !edge_pixel; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h || ids.at(nx, ny) != id) edge_pixel = true;
        }
      }
      if (!edge_pixel) continue;
      const Rgb c = palette ? palette->colors[id] : ink;
      img.set(x, y, {c[0], c[1], c[2], 255});
    }
  }
}

void draw_marker(Image& img, Pixel at, int label, Rgb fill, const SomOptions& opt) {
  const int r_fill = opt.marker_radius, r_out = opt.marker_radius + opt.marker_outline;
  for (int dy = -r_out; dy <= r_out; ++dy) {
    for (int dx = -r_out; dx <= r_out; ++dx) {
      const int x = at.x + dx, y = at.y + dy;
      if (!img.contains(x, y)) continue;
      const int d2 = dx * dx + dy * dy;
      if (d2 <= r_fill * r_fill) {
        img.set(x, y, {fill[0], fill[1], fill[2], 255});
      } else if (d2 <= r_out * r_out) {
        img.set(x, y, {kContourInk[0], kContourInk[1], kContourInk[2], 255});
      }
    }
  }
  const std::string text = std::to_string(label);
  const int gw = 5 * kGlyphScale, gh = 7 * kGlyphScale, gap = kGlyphScale;
  const int total = static_cast<int>(text.size()) * gw + (static_cast<int>(text.size()) - 1) * gap;
  int left = at.x - total / 2;
  const int top = at.y - gh / 2;
  for (char ch : text) {
    const auto& glyph = kDigits[ch - '0'];
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (!(glyph[row] & (0x10 >> col))) continue;
        for (int sy = 0; sy < kGlyphScale; ++sy) {
          for (int sx = 0; sx < kGlyphScale; ++sx) {
            const int x = left + col * kGlyphScale + sx, y = top + row * kGlyphScale + sy;
            if (img.contains(x, y)) img.set(x, y, {255, 255, 255, 255});
          }
        }
      }
    }
    left += gw + gap;
  }
}

}  // namespace

std::vector<RenderPair> render_som_pairs(const MultiPartAsset& asset, const SomOptions& options) {
  if (asset.parts.size() < 2 || asset.parts.size() > kMaxPaletteSize) {
    throw InvalidArgument("render_som_pairs needs 2..32 parts, got " + std::to_string(asset.parts.size()));
  }
  const auto rig = build_camera_rig(RigMode::Annotate14, options.rig_radius, options.image_size);
  const Palette palette = make_palette(asset.parts.size());
  std::vector<RenderPair> pairs(rig.size());
  std::vector<std::exception_ptr> errors(rig.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t vi = 0; vi < static_cast<std::ptrdiff_t>(rig.size()); ++vi) {
    try {
      const auto& cam = rig[vi];
      auto textured = rasterize(asset, cam, RenderStyle::Textured, palette);
      auto colored = rasterize(asset, cam, RenderStyle::PartColored, palette);
      RenderPair pair;
      pair.view_name = cam.name;
      pair.id_buffer = std::move(textured.id_buffer);
      pair.visible_part_ids = pair.id_buffer.visible_ids();
      pair.textured_image = std::move(textured.image);
      pair.colored_image = std::move(colored.image);
      draw_contours(pair.textured_image, pair.id_buffer, options.contour_width, &palette, kContourInk);
      draw_contours(pair.colored_image, pair.id_buffer, 1, nullptr, kContourInk);
      for (int id : pair.visible_part_ids) {
        if (auto at = place_marker(pair.id_buffer, id)) {
          pair.markers.emplace_back(id, *at);
          draw_marker(pair.textured_image, *at, id + 1, palette.colors[id], options);
          draw_marker(pair.colored_image, *at, id + 1, palette.colors[id], options);
        }
      }
      pairs[vi] = std::move(pair);
    } catch (...) {
      errors[vi] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return pairs;
}

std::vector<NamedImage> render_filter_views(const MultiPartAsset& asset, const SomOptions& options) {
  const auto rig = build_camera_rig(RigMode::Filter8, options.rig_radius, options.image_size);
  const Palette palette = make_palette(asset.parts.size());
  std::vector<NamedImage> out(rig.size());
  std::vector<std::exception_ptr> errors(rig.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t vi = 0; vi < static_cast<std::ptrdiff_t>(rig.size()); ++vi) {
    try {
      out[vi] = {rig[vi].name, rasterize(asset, rig[vi], RenderStyle::Textured, palette).image};
    } catch (...) {
      errors[vi] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::set<int> visible_union(const std::vector<RenderPair>& pairs) {
  std::set<int> out;
  for (const auto& p : pairs) out.insert(p.visible_part_ids.begin(), p.visible_part_ids.end());
  return out;
}

void write_render_pairs(const std::vector<RenderPair>& pairs, const std::filesystem::path& dir, bool dump_ids) {
  for (const auto& p : pairs) {
    write_png(dir / (p.view_name + "_textured.png"), p.textured_image);
    write_png(dir / (p.view_name + "_colored.png"), p.colored_image);
    if (dump_ids) {
      std::vector<std::uint16_t> gray(p.id_buffer.ids.size());
      for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<std::uint16_t>(p.id_buffer.ids[i] + 1);
      write_file_if_changed(dir / (p.view_name + "_ids.png"),
                            encode_png_gray16(p.id_buffer.width, p.id_buffer.height, gray));
    }
  }
}

}  // namespace partforge
