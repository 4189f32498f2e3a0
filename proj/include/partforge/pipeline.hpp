#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "partforge/asset.hpp"
#include "partforge/geometry.hpp"
#include "partforge/render.hpp"
#include "partforge/vlm.hpp"

namespace partforge {

// Lower rank wins during deduplication.
enum class Provenance { HumanCorrected = 0, RawArtist = 1, Synthetic = 2 };
std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct CatalogEntry {
  std::string asset_id;
  Source source = Source::Synthetic;
  Provenance provenance = Provenance::Synthetic;
  std::filesystem::path path;  // asset directory

  int priority_rank() const { return static_cast<int>(provenance); }
};

// catalog.json: {"assets": [{asset_id, source, provenance, path}]}; relative
// paths resolve against the catalog's directory.
std::vector<CatalogEntry> load_catalog(const std::filesystem::path& file);
// One id per line; blank lines and '#' comments ignored.
std::set<std::string> load_exclusion_list(const std::filesystem::path& file);

// Keeps the lowest-rank entry per asset_id (first seen on ties), in order of
// first appearance, minus excluded ids.
std::vector<CatalogEntry> dedup(const std::vector<CatalogEntry>& catalog, const std::set<std::string>& excluded = {});

inline constexpr std::size_t kMinParts = 2;
inline constexpr std::size_t kMaxParts = 32;

// Drops degenerate parts, enforces the 2..32 part window and normalizes the
// survivors to [-1,1]^3. Rejection reasons: TooFewParts, TooManyParts.
std::variant<MultiPartAsset, Reject> preprocess(const MultiPartAsset& asset,
                                                std::vector<std::string>* dropped_parts = nullptr);

struct PipelineConfig {
  std::filesystem::path output_root;
  int grid_resolution = 64;
  double grid_padding_fraction = 0.08;  // of the longest extent, per side
  double iso_spacing_factor = kDefaultIsoSpacingFactor;
  std::size_t points_per_sample = 8192;
  bool visibility_filter = true;
  int workers = 1;
  std::uint64_t seed = 0;
  SomOptions som;
  bool dump_id_buffers = false;
  std::string annotation_provenance = "vlm";
  std::size_t progress_every = 10;
};

struct ClusterRecord {
  std::string name;
  std::vector<int> part_ids;  // 1-based
  std::string mesh_file;      // relative to the output root
  std::string points_file;
  std::size_t face_count = 0;
  friend bool operator==(const ClusterRecord&, const ClusterRecord&) = default;
};

struct AssetRecord {
  std::string asset_id;
  Source source = Source::Synthetic;
  std::vector<ClusterRecord> clusters;
  std::string full_points_file;
  std::vector<int> unlabeled_part_ids;
  std::string annotation_provenance;
  friend bool operator==(const AssetRecord&, const AssetRecord&) = default;
};

struct DatasetManifest {
  std::vector<AssetRecord> assets;

  std::size_t part_count() const;
  const AssetRecord* find(std::string_view asset_id) const;
};

struct RejectionLog {
  std::map<std::string, Rejection> entries;
  std::map<std::string, std::string> details;
};

nlohmann::json to_json(const AssetRecord& r);
AssetRecord asset_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest dataset_manifest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RejectionLog& log);

struct PipelineResult {
  DatasetManifest manifest;
  RejectionLog rejections;
  std::vector<std::string> recomputed;  // assets whose stage chain ran (fully or partly)
};

// Runs preprocess -> filter -> cluster -> postprocess for every entry with a
// bounded worker pool. Completed stages recorded in {root}/{id}/status.json
// are skipped. Per-asset failures become rejections; IO failures on the
// output tree are fatal (IoFailure).
PipelineResult run_pipeline(const std::vector<CatalogEntry>& catalog, const PipelineConfig& config,
                            VlmClient& client);

// Watertight mesh of a set of parts: UDF on a fitted grid, then the level set.
Mesh watertight(const Mesh& mesh, int resolution, double padding_fraction, double iso_spacing_factor);

// Watertight cluster meshes, per-cluster and full-shape samples and
// record.json under {output_root}/{asset_id}. Throws DegenerateInput when a
// watertight result is not a closed 2-manifold.
AssetRecord postprocess_asset(const MultiPartAsset& asset, const Annotation& annotation, const PipelineConfig& config);

struct EpochOptions {
  int epochs = 1;
  std::size_t points_per_sample = 2048;
  std::uint64_t seed = 0;
  double validation_fraction = 0.02;
};

struct EpochSummary {
  std::vector<std::string> validation_ids;
  std::vector<std::vector<std::string>> epoch_orders;  // training ids per epoch
  std::size_t files_written = 0;
};

bool is_validation(const std::string& asset_id, double fraction);

// Writes {out}/epoch_{NNN}/{rank}_{asset}/*.pfpc and {out}/validation/{asset}/*.pfpc,
// each cloud FPS-subsampled after a seeded pre-permutation, plus index.json.
// Throws InsufficientPoints.
EpochSummary emit_epochs(const DatasetManifest& manifest, const std::filesystem::path& root,
                         const std::filesystem::path& out, const EpochOptions& options);

}  // namespace partforge
