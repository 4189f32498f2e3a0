#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "partforge/asset.hpp"
#include "partforge/image.hpp"

namespace partforge {

struct Camera {
  std::string name;
  Vec3 position;
  Vec3 look_at;
  Vec3 up{0, 1, 0};
  double vertical_fov = 50.0;  // degrees
  int image_size = 768;
};

// Throws InvalidArgument if position == look_at or up is parallel to the view.
void validate_camera(const Camera& camera);

enum class RigMode { Annotate14, Filter8 };

inline constexpr int kAnnotateViewCount = 14;
inline constexpr int kFilterViewCount = 8;
inline constexpr int kDefaultImageSize = 768;
inline constexpr double kDefaultRigRadius = 4.0;
// Bounding radius of the [-1,1]^3 box.
inline constexpr double kUnitBoxRadius = 1.7320508075688772;

// Orbital rig looking at the origin. Annotate14: eight views at 25 degrees
// elevation, four at -20, one top, one front high tilt. Filter8: the eight
// 25-degree views. Throws InvalidArgument if radius <= unit box radius.
std::vector<Camera> build_camera_rig(RigMode mode, double radius = kDefaultRigRadius,
                                     int image_size = kDefaultImageSize);

using Rgb = std::array<std::uint8_t, 3>;

struct Palette {
  std::vector<Rgb> colors;  // one per part index
};

inline constexpr int kMaxPaletteSize = 32;
inline constexpr double kMinPaletteLabDistance = 25.0;

// Deterministic palette whose colours are pairwise >= 25 apart in CIE-Lab.
Palette make_palette(std::size_t part_count);

std::array<double, 3> srgb_to_lab(Rgb c);
double lab_distance(Rgb a, Rgb b);

enum class RenderStyle { Textured, PartColored };

// Per-pixel front-most part index, -1 where no part covers the pixel.
struct IdBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> ids;

  std::int32_t at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
  std::set<int> visible_ids() const;
  friend bool operator==(const IdBuffer&, const IdBuffer&) = default;
};

struct Rendered {
  Image image;
  IdBuffer id_buffer;
};

// Z-buffered perspective rasterization with fixed-point edge functions.
// Throws EmptyRender when no pixel is covered.
Rendered rasterize(const MultiPartAsset& asset, const Camera& camera, RenderStyle style,
                   const Palette& palette);

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(Pixel, Pixel) = default;
};

// Pixel of the part mask farthest (Euclidean) from any non-mask pixel, where
// pixels outside the image count as non-mask. Ties: topmost, then leftmost.
std::optional<Pixel> place_marker(const IdBuffer& ids, int part_id);

// Squared Euclidean distance transform of a binary mask to its complement,
// with the outside of the image treated as complement.
std::vector<std::int64_t> squared_distance_to_boundary(int width, int height, const std::vector<std::uint8_t>& mask);

struct RenderPair {
  std::string view_name;
  Image textured_image;
  Image colored_image;
  IdBuffer id_buffer;
  std::set<int> visible_part_ids;
  std::vector<std::pair<int, Pixel>> markers;  // (part index, centre)
};

struct SomOptions {
  double rig_radius = kDefaultRigRadius;
  int image_size = kDefaultImageSize;
  int marker_radius = 14;
  int marker_outline = 2;
  int contour_width = 2;
};

inline constexpr Rgb kContourInk{28, 28, 28};
inline constexpr Rgb kBackground{255, 255, 255};

// 14 paired renders with part contours and numbered markers (1-based).
// Throws InvalidArgument unless 2 <= part count <= 32; propagates EmptyRender.
std::vector<RenderPair> render_som_pairs(const MultiPartAsset& asset, const SomOptions& options = {});

struct NamedImage {
  std::string view_name;
  Image image;
};

// Plain textured renders from the Filter8 rig.
std::vector<NamedImage> render_filter_views(const MultiPartAsset& asset, const SomOptions& options = {});

std::set<int> visible_union(const std::vector<RenderPair>& pairs);

// Writes {dir}/{view}_{textured|colored}.png and optionally {view}_ids.png
// (16-bit grayscale, part index + 1, 0 = background).
void write_render_pairs(const std::vector<RenderPair>& pairs, const std::filesystem::path& dir, bool dump_ids);

}  // namespace partforge
