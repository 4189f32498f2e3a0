#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "partforge/image.hpp"
#include "partforge/vec.hpp"

namespace partforge {

using Face = std::array<std::uint32_t, 3>;

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> normals;  // empty, or one unit vector per vertex
  std::vector<Vec2> uvs;      // empty, or one per vertex
  std::optional<std::string> texture_file;
  std::shared_ptr<const Image> texture;

  bool has_normals() const { return !normals.empty(); }
  bool has_uvs() const { return !uvs.empty(); }
  double surface_area() const;
  Aabb bounds() const;
};

// Throws IndexOutOfRange / MalformedMesh naming `part` when an invariant fails.
void validate_mesh(const Mesh& mesh, const std::string& part);

enum class Source { Sketchfab, Commercial, Internal, Synthetic };
std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

struct Part {
  std::string name;
  Mesh mesh;
};

struct MultiPartAsset {
  std::string asset_id;
  Source source = Source::Synthetic;
  std::vector<Part> parts;  // manifest order is significant
  std::optional<std::string> global_caption;

  std::size_t part_count() const { return parts.size(); }
  const Part* find(std::string_view name) const;
};

// Throws InvalidAsset when the asset is empty or names repeat.
void validate_asset(const MultiPartAsset& asset);

class PartSchema {
 public:
  // Throws InvalidSchema when empty or when two names collide after trim + case-fold.
  explicit PartSchema(std::vector<std::string> names);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  bool contains(std::string_view name) const;

 private:
  std::vector<std::string> names_;
};

std::string trim(std::string_view s);
std::string case_fold(std::string_view s);

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty or parallel to points

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
};

enum class Stage { Preprocess = 0, Filter = 1, Cluster = 2, Postprocess = 3 };
inline constexpr std::array<Stage, 4> kAllStages{Stage::Preprocess, Stage::Filter, Stage::Cluster,
                                                 Stage::Postprocess};
std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct ManifestPartEntry {
  std::string name;
  std::string mesh_file;
  std::size_t face_count = 0;
  double surface_area = 0.0;
};

struct Rejection {
  Stage stage = Stage::Preprocess;
  std::string reason;
};

class AssetManifest {
 public:
  std::string asset_id;
  std::vector<ManifestPartEntry> parts;

  // Stage statuses form a prefix chain; recording a stage whose predecessor is
  // not complete throws InvalidArgument.
  void record_stage(Stage s);
  bool is_done(Stage s) const { return static_cast<int>(s) < completed_; }
  int completed_stage_count() const { return completed_; }

  void reject(Stage s, std::string reason);
  const std::optional<Rejection>& rejection() const { return rejection_; }

 private:
  int completed_ = 0;
  std::optional<Rejection> rejection_;
};

struct ObjStats {
  std::size_t ignored_records = 0;
};

Mesh read_obj(const std::filesystem::path& path, const std::string& part, ObjStats* stats = nullptr);
Mesh parse_obj(std::string_view text, const std::string& part, ObjStats* stats = nullptr);
std::string format_obj(const Mesh& mesh);
void write_obj(const std::filesystem::path& path, const Mesh& mesh);

MultiPartAsset load_asset(const std::filesystem::path& dir);
AssetManifest save_asset(const MultiPartAsset& asset, const std::filesystem::path& dir);

Mesh concat_meshes(const std::vector<const Mesh*>& meshes);
Mesh concat_parts(const MultiPartAsset& asset);

// File-name-safe version of a part or cluster name.
std::string sanitize_name(std::string_view name);

}  // namespace partforge
