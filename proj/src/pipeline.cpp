#include "partforge/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "partforge/errors.hpp"
#include "partforge/rng.hpp"

namespace partforge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::HumanCorrected: return "human_corrected";
    case Provenance::RawArtist: return "raw_artist";
    case Provenance::Synthetic: return "synthetic";
  }
  return "synthetic";
}

Provenance provenance_from_string(std::string_view s) {
  const auto v = case_fold(trim(s));
  if (v == "human_corrected") return Provenance::HumanCorrected;
  if (v == "raw_artist") return Provenance::RawArtist;
  if (v == "synthetic") return Provenance::Synthetic;
  throw InvalidArgument("unknown provenance '" + std::string(s) + "'");
}

namespace {

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoFailure("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoFailure("malformed JSON in " + file.string() + ": " + e.what());
  }
}

void write_json(const fs::path& file, const json& j) {
  std::error_code ec;
  fs::create_directories(file.parent_path(), ec);
  if (ec) throw IoFailure("cannot create " + file.parent_path().string() + ": " + ec.message());
  write_file_if_changed(file, j.dump(2) + "\n");
}

}  // namespace

std::vector<CatalogEntry> load_catalog(const fs::path& file) {
  const json j = read_json(file);
  const json& items = j.is_array() ? j : j.at("assets");
  std::vector<CatalogEntry> out;
  try {
    for (const auto& item : items) {
      CatalogEntry e;
      e.asset_id = item.at("asset_id").get<std::string>();
      e.source = source_from_string(item.value("source", std::string("synthetic")));
      e.provenance = provenance_from_string(item.value("provenance", std::string("synthetic")));
      fs::path p = item.at("path").get<std::string>();
      e.path = p.is_absolute() ? p : file.parent_path() / p;
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw IoFailure("malformed catalog " + file.string() + ": " + e.what());
  }
  return out;
}

std::set<std::string> load_exclusion_list(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoFailure("cannot open exclusion list " + file.string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto id = trim(line);
    if (!id.empty()) ids.insert(std::move(id));
  }
  return ids;
}

std::vector<CatalogEntry> dedup(const std::vector<CatalogEntry>& catalog, const std::set<std::string>& excluded) {
  std::vector<CatalogEntry> out;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : catalog) {
    if (excluded.contains(e.asset_id)) continue;
    auto [it, inserted] = slot.emplace(e.asset_id, out.size());
    if (inserted) {
      out.push_back(e);
    } else if (e.priority_rank() < out[it->second].priority_rank()) {
      out[it->second] = e;
    }
  }
  return out;
}

std::variant<MultiPartAsset, Reject> preprocess(const MultiPartAsset& asset, std::vector<std::string>* dropped_parts) {
  MultiPartAsset kept = asset;
  kept.parts.clear();
  auto drop = [&](const Part& p) {
    if (dropped_parts) dropped_parts->push_back(p.name);
  };
  for (const auto& p : asset.parts) {
    const auto flags = detect_degenerate(p.mesh);
    if (flags.has(DegenerateFlag::Empty) || flags.has(DegenerateFlag::NanVertices)) {
      drop(p);
    } else {
      kept.parts.push_back(p);
    }
  }
  auto count_check = [](std::size_t n) -> std::optional<Reject> {
    if (n < kMinParts) return Reject{"TooFewParts", std::to_string(n) + " usable parts"};
    if (n > kMaxParts) return Reject{"TooManyParts", std::to_string(n) + " usable parts"};
    return std::nullopt;
  };
  if (kept.parts.empty()) return *count_check(0);
  // Area is judged in normalized units so the threshold is scale-free.
  auto normalized = normalize_to_unit_box(kept).first;
  MultiPartAsset survivors = kept;
  survivors.parts.clear();
  for (std::size_t i = 0; i < kept.parts.size(); ++i) {
    if (detect_degenerate(normalized.parts[i].mesh).has(DegenerateFlag::ZeroArea)) {
      drop(kept.parts[i]);
    } else {
      survivors.parts.push_back(kept.parts[i]);
    }
  }
  if (auto r = count_check(survivors.parts.size())) return *r;
  return normalize_to_unit_box(survivors).first;
}

// ---------------------------------------------------------------------------
// Manifest serialization

std::size_t DatasetManifest::part_count() const {
  std::size_t n = 0;
  for (const auto& a : assets) n += a.clusters.size();
  return n;
}

const AssetRecord* DatasetManifest::find(std::string_view asset_id) const {
  for (const auto& a : assets) {
    if (a.asset_id == asset_id) return &a;
  }
  return nullptr;
}

json to_json(const AssetRecord& r) {
  json clusters = json::array();
  for (const auto& c : r.clusters) {
    clusters.push_back({{"name", c.name},
                        {"part_ids", c.part_ids},
                        {"mesh_file", c.mesh_file},
                        {"points_file", c.points_file},
                        {"face_count", c.face_count}});
  }
  return {{"asset_id", r.asset_id},
          {"source", to_string(r.source)},
          {"clusters", std::move(clusters)},
          {"full_points_file", r.full_points_file},
          {"unlabeled_part_ids", r.unlabeled_part_ids},
          {"annotation_provenance", r.annotation_provenance}};
}

AssetRecord asset_record_from_json(const json& j) {
  AssetRecord r;
  r.asset_id = j.at("asset_id").get<std::string>();
  r.source = source_from_string(j.at("source").get<std::string>());
  for (const auto& c : j.at("clusters")) {
    r.clusters.push_back({c.at("name").get<std::string>(), c.at("part_ids").get<std::vector<int>>(),
                          c.at("mesh_file").get<std::string>(), c.at("points_file").get<std::string>(),
                          c.at("face_count").get<std::size_t>()});
  }
  r.full_points_file = j.at("full_points_file").get<std::string>();
  r.unlabeled_part_ids = j.at("unlabeled_part_ids").get<std::vector<int>>();
  r.annotation_provenance = j.value("annotation_provenance", "");
  return r;
}

json to_json(const DatasetManifest& m) {
  json assets = json::array();
  for (const auto& a : m.assets) assets.push_back(to_json(a));
  return {{"asset_count", m.assets.size()}, {"part_count", m.part_count()}, {"assets", std::move(assets)}};
}

DatasetManifest dataset_manifest_from_json(const json& j) {
  DatasetManifest m;
  for (const auto& a : j.at("assets")) m.assets.push_back(asset_record_from_json(a));
  return m;
}

json to_json(const RejectionLog& log) {
  json out = json::object();
  for (const auto& [id, r] : log.entries) {
    json e = {{"stage", to_string(r.stage)}, {"reason", r.reason}};
    if (auto it = log.details.find(id); it != log.details.end()) e["detail"] = it->second;
    out[id] = std::move(e);
  }
  return out;
}

Mesh watertight(const Mesh& mesh, int resolution, double padding_fraction, double iso_spacing_factor) {
  const Aabb box = mesh.bounds();
  const Vec3 e = box.extent();
  const double longest = std::max({e.x, e.y, e.z});
  const GridSpec spec = fit_grid(box, resolution, padding_fraction * longest);
  return extract_level_set(compute_udf(mesh, spec), iso_spacing_factor * spec.spacing);
}

// ---------------------------------------------------------------------------
// Per-asset stage chain

namespace {

std::string reason_for(const std::exception& e) {
  if (dynamic_cast<const EmptyRender*>(&e)) return "EmptyRender";
  if (dynamic_cast<const VlmError*>(&e)) return "VlmError";
  if (dynamic_cast<const MissingField*>(&e)) return "MissingField";
  if (dynamic_cast<const Unparseable*>(&e)) return "Unparseable";
  if (dynamic_cast<const InvalidTier*>(&e)) return "InvalidTier";
  if (dynamic_cast<const EmptyClustering*>(&e)) return "EmptyClustering";
  if (dynamic_cast<const NoSurface*>(&e)) return "NoSurface";
  if (dynamic_cast<const VisibilityExhausted*>(&e)) return "VisibilityExhausted";
  if (dynamic_cast<const DegenerateInput*>(&e)) return "DegenerateInput";
  if (dynamic_cast<const ZeroExtent*>(&e)) return "ZeroExtent";
  if (dynamic_cast<const MissingManifest*>(&e)) return "MissingManifest";
  if (dynamic_cast<const IndexOutOfRange*>(&e)) return "IndexOutOfRange";
  if (dynamic_cast<const MalformedMesh*>(&e)) return "MalformedMesh";
  if (dynamic_cast<const InvalidAsset*>(&e)) return "InvalidAsset";
  return "Error";
}

// Transient failures are logged but not persisted, so a rerun retries them.
bool is_transient(const std::string& reason) { return reason == "VlmError"; }

json status_json(const AssetManifest& m, const std::string& detail) {
  json stages = json::array();
  for (auto s : kAllStages) {
    if (m.is_done(s)) stages.push_back(to_string(s));
  }
  json j = {{"asset_id", m.asset_id}, {"completed", std::move(stages)}, {"rejection", nullptr}};
  if (m.rejection()) {
    j["rejection"] = {{"stage", to_string(m.rejection()->stage)}, {"reason", m.rejection()->reason}, {"detail", detail}};
  }
  return j;
}

struct StoredStatus {
  AssetManifest manifest;
  std::string detail;
};

std::optional<StoredStatus> read_status(const fs::path& file) {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) return std::nullopt;
  try {
    const json j = read_json(file);
    StoredStatus s;
    s.manifest.asset_id = j.at("asset_id").get<std::string>();
    for (const auto& st : j.at("completed")) s.manifest.record_stage(stage_from_string(st.get<std::string>()));
    if (!j.at("rejection").is_null()) {
      const auto& r = j["rejection"];
      s.manifest.reject(stage_from_string(r.at("stage").get<std::string>()), r.at("reason").get<std::string>());
      s.detail = r.value("detail", "");
    }
    return s;
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable status {}: {}", file.string(), e.what());
    return std::nullopt;
  }
}

Mesh make_watertight(const Mesh& mesh, const PipelineConfig& config, const std::string& what) {
  Mesh wt = watertight(mesh, config.grid_resolution, config.grid_padding_fraction, config.iso_spacing_factor);
  const auto report = check_manifold(wt);
  if (!report.is_closed || !report.is_two_manifold) {
    throw DegenerateInput("watertight mesh for " + what + " is not a closed 2-manifold");
  }
  return wt;
}

}  // namespace

AssetRecord postprocess_asset(const MultiPartAsset& asset, const Annotation& annotation, const PipelineConfig& config) {
  const fs::path dir = config.output_root / asset.asset_id;
  AssetRecord record;
  record.asset_id = asset.asset_id;
  record.source = asset.source;
  record.annotation_provenance = config.annotation_provenance;
  record.unlabeled_part_ids.assign(annotation.invisible_part_ids.begin(), annotation.invisible_part_ids.end());
  fs::create_directories(dir / "clusters");
  fs::create_directories(dir / "points");
  const std::string rel = asset.asset_id + "/";
  std::size_t index = 0;
  for (const auto& cluster : annotation.clustering.clusters) {
    std::vector<const Mesh*> members;
    for (int id : cluster.part_ids) {
      if (id < 1 || static_cast<std::size_t>(id) > asset.parts.size()) {
        throw InvalidArgument("cluster '" + cluster.name + "' references part " + std::to_string(id));
      }
      members.push_back(&asset.parts[static_cast<std::size_t>(id - 1)].mesh);
    }
    char prefix[16];
    std::snprintf(prefix, sizeof(prefix), "%02zu_", index);
    const std::string stem = prefix + sanitize_name(cluster.name);
    const Mesh mesh = make_watertight(concat_meshes(members), config, cluster.name);
    write_obj(dir / "clusters" / (stem + ".obj"), mesh);
    const auto seed = mix_seed(config.seed, fnv1a64(asset.asset_id + "/" + stem));
    write_pfpc(dir / "points" / (stem + ".pfpc"),
               sample_surface(mesh, config.points_per_sample, seed, config.visibility_filter));
    record.clusters.push_back({cluster.name, std::vector<int>(cluster.part_ids.begin(), cluster.part_ids.end()),
                               rel + "clusters/" + stem + ".obj", rel + "points/" + stem + ".pfpc",
                               mesh.faces.size()});
    ++index;
  }
  const Mesh full = make_watertight(concat_parts(asset), config, "full shape");
  const auto seed = mix_seed(config.seed, fnv1a64(asset.asset_id + "/full"));
  write_pfpc(dir / "points" / "full.pfpc",
             sample_surface(full, config.points_per_sample, seed, config.visibility_filter));
  record.full_points_file = rel + "points/full.pfpc";
  write_json(dir / "record.json", to_json(record));
  return record;
}

namespace {

struct Outcome {
  std::optional<AssetRecord> record;
  std::optional<Rejection> rejection;
  std::string detail;
  bool recomputed = false;
};

class AssetJob {
 public:
  AssetJob(const CatalogEntry& entry, const PipelineConfig& config, VlmClient& client)
      : entry_(entry), config_(config), client_(client), dir_(config.output_root / entry.asset_id) {
    status_.asset_id = entry.asset_id;
  }

  Outcome run() {
    if (auto stored = read_status(dir_ / "status.json")) {
      if (stored->manifest.rejection()) {
        return {std::nullopt, stored->manifest.rejection(), stored->detail, false};
      }
      for (auto s : kAllStages) {
        if (!stored->manifest.is_done(s) || !outputs_present(s)) break;
        status_.record_stage(s);
      }
    }
    if (status_.is_done(Stage::Postprocess)) {
      return {asset_record_from_json(read_json(dir_ / "record.json")), std::nullopt, {}, false};
    }
    Outcome out;
    out.recomputed = true;
    Stage current = Stage::Preprocess;
    try {
      current = Stage::Preprocess;
      if (!run_preprocess(out)) return out;
      current = Stage::Filter;
      if (!run_filter(out)) return out;
      current = Stage::Cluster;
      if (!run_cluster(out)) return out;
      current = Stage::Postprocess;
      run_postprocess(out);
    } catch (const IoFailure&) {
      throw;
    } catch (const fs::filesystem_error& e) {
      throw IoFailure(e.what());
    } catch (const Error& e) {
      reject(out, current, reason_for(e), e.what());
    }
    return out;
  }

 private:
  bool outputs_present(Stage s) const {
    std::error_code ec;
    switch (s) {
      case Stage::Preprocess: return fs::is_regular_file(dir_ / "preprocessed" / "manifest.json", ec);
      case Stage::Filter: return fs::is_regular_file(dir_ / "quality.json", ec);
      case Stage::Cluster: return fs::is_regular_file(dir_ / "annotation.json", ec);
      case Stage::Postprocess: {
        if (!fs::is_regular_file(dir_ / "record.json", ec)) return false;
        try {
          const auto r = asset_record_from_json(read_json(dir_ / "record.json"));
          if (!fs::is_regular_file(config_.output_root / r.full_points_file, ec)) return false;
          for (const auto& c : r.clusters) {
            if (!fs::is_regular_file(config_.output_root / c.mesh_file, ec) ||
                !fs::is_regular_file(config_.output_root / c.points_file, ec)) {
              return false;
            }
          }
          return true;
        } catch (const std::exception&) {
          return false;
        }
      }
    }
    return false;
  }

  void save_status(const std::string& detail = {}) { write_json(dir_ / "status.json", status_json(status_, detail)); }

  void complete(Stage s) {
    status_.record_stage(s);
    save_status();
    spdlog::info("asset={} stage={} done", entry_.asset_id, to_string(s));
  }

  void reject(Outcome& out, Stage s, const std::string& reason, const std::string& detail) {
    out.rejection = Rejection{s, reason};
    out.detail = detail;
    spdlog::warn("asset={} stage={} rejected reason={} detail={}", entry_.asset_id, to_string(s), reason, detail);
    if (is_transient(reason)) return;
    status_.reject(s, reason);
    save_status(detail);
  }

  bool run_preprocess(Outcome& out) {
    if (status_.is_done(Stage::Preprocess)) {
      asset_ = load_asset(dir_ / "preprocessed");
      return true;
    }
    const MultiPartAsset source = load_asset(entry_.path);
    std::vector<std::string> dropped;
    auto result = preprocess(source, &dropped);
    for (const auto& name : dropped) spdlog::info("asset={} dropped degenerate part '{}'", entry_.asset_id, name);
    if (auto* r = std::get_if<Reject>(&result)) {
      reject(out, Stage::Preprocess, r->reason, r->detail);
      return false;
    }
    asset_ = std::get<MultiPartAsset>(std::move(result));
    asset_.asset_id = entry_.asset_id;
    asset_.source = entry_.source;
    save_asset(asset_, dir_ / "preprocessed");
    // Reload so downstream stages see exactly what a resumed run would.
    asset_ = load_asset(dir_ / "preprocessed");
    complete(Stage::Preprocess);
    return true;
  }

  bool run_filter(Outcome& out) {
    QualityReport report;
    if (status_.is_done(Stage::Filter)) {
      report = quality_report_from_json(read_json(dir_ / "quality.json"));
    } else {
      const auto views = render_filter_views(asset_, config_.som);
      fs::create_directories(dir_ / "filter");
      for (const auto& v : views) write_png(dir_ / "filter" / (v.view_name + ".png"), v.image);
      report = assess_quality(client_, entry_.asset_id, views);
      write_json(dir_ / "quality.json", to_json(report));
    }
    if (quality_gate(report) == GateResult::Fail) {
      reject(out, Stage::Filter, "QualityGate", "score " + std::string(to_string(report.score)));
      return false;
    }
    if (!status_.is_done(Stage::Filter)) complete(Stage::Filter);
    return true;
  }

  bool run_cluster(Outcome& out) {
    if (status_.is_done(Stage::Cluster)) {
      annotation_ = annotation_from_json(read_json(dir_ / "annotation.json"));
      return true;
    }
    const auto pairs = render_som_pairs(asset_, config_.som);
    fs::create_directories(dir_ / "som");
    write_render_pairs(pairs, dir_ / "som", config_.dump_id_buffers);
    auto result = annotate_asset(asset_, client_, pairs);
    if (auto* r = std::get_if<Reject>(&result)) {
      reject(out, Stage::Cluster, r->reason, r->detail);
      return false;
    }
    annotation_ = std::get<Annotation>(std::move(result));
    write_json(dir_ / "annotation.json", to_json(annotation_));
    complete(Stage::Cluster);
    return true;
  }

  void run_postprocess(Outcome& out) {
    AssetRecord record = postprocess_asset(asset_, annotation_, config_);
    complete(Stage::Postprocess);
    out.record = std::move(record);
  }

  const CatalogEntry& entry_;
  const PipelineConfig& config_;
  VlmClient& client_;
  fs::path dir_;
  AssetManifest status_;
  MultiPartAsset asset_;
  Annotation annotation_;
};

}  // namespace

PipelineResult run_pipeline(const std::vector<CatalogEntry>& catalog, const PipelineConfig& config,
                            VlmClient& client) {
  if (config.output_root.empty()) throw ConfigError("pipeline output root is not set");
  std::error_code ec;
  fs::create_directories(config.output_root, ec);
  if (ec) throw IoFailure("cannot create output root " + config.output_root.string() + ": " + ec.message());
  {
    std::set<std::string> seen;
    for (const auto& e : catalog) {
      if (!seen.insert(e.asset_id).second) throw InvalidArgument("duplicate asset id '" + e.asset_id + "'; dedup first");
    }
  }

  std::vector<Outcome> outcomes(catalog.size());
  std::atomic<std::size_t> next{0}, finished{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next++;
      if (i >= catalog.size()) return;
      try {
        outcomes[i] = AssetJob(catalog[i], config, client).run();
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        stop = true;
        return;
      }
      const auto done = ++finished;
      if (config.progress_every > 0 && (done % config.progress_every == 0 || done == catalog.size())) {
        spdlog::info("progress {}/{} assets", done, catalog.size());
      }
    }
  };
  const auto n_workers = static_cast<std::size_t>(std::clamp<int>(config.workers, 1, 256));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(n_workers, catalog.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);

  PipelineResult result;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    auto& o = outcomes[i];
    if (o.recomputed) result.recomputed.push_back(catalog[i].asset_id);
    if (o.record) {
      result.manifest.assets.push_back(std::move(*o.record));
    } else if (o.rejection) {
      result.rejections.entries[catalog[i].asset_id] = *o.rejection;
      result.rejections.details[catalog[i].asset_id] = o.detail;
    }
  }
  write_json(config.output_root / "dataset.json", to_json(result.manifest));
  write_json(config.output_root / "rejections.json", to_json(result.rejections));
  spdlog::info("pipeline finished: {} accepted ({} parts), {} rejected", result.manifest.assets.size(),
               result.manifest.part_count(), result.rejections.entries.size());
  return result;
}

// ---------------------------------------------------------------------------
// Epoch emission

bool is_validation(const std::string& asset_id, double fraction) {
  constexpr std::uint64_t kBuckets = 1'000'000;
  return static_cast<double>(fnv1a64(asset_id) % kBuckets) < fraction * kBuckets;
}

namespace {

PointCloud subsample(const PointCloud& pc, std::size_t k, std::uint64_t seed, const std::string& what) {
  if (pc.size() < k) {
    throw InsufficientPoints(what + " has " + std::to_string(pc.size()) + " points, " + std::to_string(k) +
                             " requested");
  }
  std::vector<std::uint32_t> perm(pc.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<std::uint32_t>(i);
  Rng rng(seed);
  shuffle(perm, rng);
  const PointCloud permuted = select_points(pc, perm);
  return select_points(permuted, farthest_point_sample(permuted, k, StartRule::FirstIndex));
}

std::size_t write_sample(const AssetRecord& a, const fs::path& root, const fs::path& dir, std::size_t k,
                         std::uint64_t seed) {
  fs::create_directories(dir);
  std::size_t files = 0;
  std::vector<std::string> sources;
  for (const auto& c : a.clusters) sources.push_back(c.points_file);
  sources.push_back(a.full_points_file);
  for (const auto& src : sources) {
    const auto pc = read_pfpc(root / src);
    const auto name = fs::path(src).filename();
    write_pfpc(dir / name, subsample(pc, k, mix_seed(seed, fnv1a64(name.string())), a.asset_id + "/" + name.string()));
    ++files;
  }
  return files;
}

}  // namespace

EpochSummary emit_epochs(const DatasetManifest& manifest, const fs::path& root, const fs::path& out,
                         const EpochOptions& options) {
  if (options.epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (options.points_per_sample == 0) throw InvalidArgument("points_per_sample must be positive");
  EpochSummary summary;
  std::vector<const AssetRecord*> train;
  for (const auto& a : manifest.assets) {
    if (is_validation(a.asset_id, options.validation_fraction)) {
      summary.validation_ids.push_back(a.asset_id);
    } else {
      train.push_back(&a);
    }
  }
  const std::uint64_t val_seed = mix_seed(options.seed, fnv1a64("validation"));
  for (const auto& a : manifest.assets) {
    if (!is_validation(a.asset_id, options.validation_fraction)) continue;
    summary.files_written += write_sample(a, root, out / "validation" / a.asset_id, options.points_per_sample,
                                          mix_seed(val_seed, fnv1a64(a.asset_id)));
  }
  write_json(out / "validation" / "index.json", {{"assets", summary.validation_ids}});

  for (int e = 0; e < options.epochs; ++e) {
    const std::uint64_t epoch_seed = mix_seed(options.seed, static_cast<std::uint64_t>(e));
    auto order = train;
    Rng rng(epoch_seed);
    shuffle(order, rng);
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d", e);
    const fs::path dir = out / name;
    std::vector<std::string> ids;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const auto* a = order[rank];
      char slot[32];
      std::snprintf(slot, sizeof(slot), "%06zu_", rank);
      summary.files_written += write_sample(*a, root, dir / (slot + a->asset_id), options.points_per_sample,
                                            mix_seed(epoch_seed, fnv1a64(a->asset_id)));
      ids.push_back(a->asset_id);
    }
    write_json(dir / "index.json", {{"epoch", e}, {"assets", ids}});
    summary.epoch_orders.push_back(std::move(ids));
  }
  return summary;
}

}  // namespace partforge
