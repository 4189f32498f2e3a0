#include "cli.hpp"

#include <omp.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "partforge/config.hpp"
#include "partforge/errors.hpp"
#include "partforge/eval.hpp"
#include "partforge/flow.hpp"
#include "partforge/image.hpp"
#include "partforge/pipeline.hpp"
#include "partforge/render.hpp"
#include "partforge/vlm.hpp"

namespace partforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  bool json_output = false;
  std::string log_level = "info";
};

class Context {
 public:
  Context(const Globals& g, std::ostream& out) : globals_(g), out_(out) {}

  const Config& config() {
    if (!config_) config_ = globals_.config_path.empty() ? default_config() : load_config(globals_.config_path);
    return *config_;
  }
  bool json_output() const { return globals_.json_output; }
  std::ostream& out() { return out_; }

  // Prints a JSON document in --json mode, otherwise the text form.
  void report(const json& j, const std::string& text) {
    if (globals_.json_output) {
      out_ << j.dump(2) << "\n";
    } else {
      out_ << text;
      if (!text.empty() && text.back() != '\n') out_ << "\n";
    }
  }

 private:
  const Globals& globals_;
  std::ostream& out_;
  std::optional<Config> config_;
};

json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoFailure("cannot read " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoFailure("invalid JSON in " + file.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& file, const json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_file_if_changed(file, j.dump(2) + "\n");
}

std::string reject_text(const std::string& id, const Reject& r) {
  return id + ": rejected (" + r.reason + ")" + (r.detail.empty() ? "" : " " + r.detail);
}

json reject_json(const std::string& id, const std::string& stage, const Reject& r) {
  return {{"asset_id", id}, {"status", "rejected"}, {"stage", stage}, {"reason", r.reason}, {"detail", r.detail}};
}

// Loads and preprocesses an asset; nullopt after reporting a rejection.
std::optional<MultiPartAsset> load_preprocessed(Context& ctx, const fs::path& dir) {
  const auto source = load_asset(dir);
  auto result = preprocess(source);
  if (auto* r = std::get_if<Reject>(&result)) {
    ctx.report(reject_json(source.asset_id, "preprocess", *r), reject_text(source.asset_id, *r));
    return std::nullopt;
  }
  auto asset = std::get<MultiPartAsset>(std::move(result));
  asset.asset_id = source.asset_id;
  asset.source = source.source;
  asset.global_caption = source.global_caption;
  return asset;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string catalog, exclude, out;
};

int run_ingest(Context& ctx, const IngestArgs& a) {
  const auto catalog = load_catalog(a.catalog);
  const auto excluded = a.exclude.empty() ? std::set<std::string>{} : load_exclusion_list(a.exclude);
  const auto kept = dedup(catalog, excluded);
  json assets = json::array();
  for (const auto& e : kept) {
    assets.push_back({{"asset_id", e.asset_id},
                      {"source", to_string(e.source)},
                      {"provenance", to_string(e.provenance)},
                      {"path", fs::absolute(e.path).lexically_normal().generic_string()}});
  }
  const json doc{{"assets", assets}};
  if (!a.out.empty()) write_json_file(a.out, doc);
  ctx.report({{"input", catalog.size()}, {"kept", kept.size()}, {"assets", assets}},
             "ingested " + std::to_string(catalog.size()) + " entries, kept " + std::to_string(kept.size()));
  return kExitOk;
}

struct AssetOutArgs {
  std::string asset, out;
  bool filter = false;
};

int run_preprocess(Context& ctx, const AssetOutArgs& a) {
  auto asset = load_preprocessed(ctx, a.asset);
  if (!asset) return kExitPartial;
  save_asset(*asset, a.out);
  ctx.report({{"asset_id", asset->asset_id}, {"status", "ok"}, {"parts", asset->part_count()}},
             asset->asset_id + ": " + std::to_string(asset->part_count()) + " parts written to " + a.out);
  return kExitOk;
}

int run_render_som(Context& ctx, const AssetOutArgs& a) {
  const auto& config = ctx.config();
  auto asset = load_preprocessed(ctx, a.asset);
  if (!asset) return kExitPartial;
  fs::create_directories(a.out);
  std::size_t count = 0;
  if (a.filter) {
    const auto views = render_filter_views(*asset, som_options(config));
    for (const auto& v : views) write_png(fs::path(a.out) / (v.view_name + ".png"), v.image);
    count = views.size();
  } else {
    const auto pairs = render_som_pairs(*asset, som_options(config));
    write_render_pairs(pairs, a.out, config.render.dump_id_buffers);
    count = pairs.size();
  }
  ctx.report({{"asset_id", asset->asset_id}, {"mode", a.filter ? "filter" : "som"}, {"views", count}},
             asset->asset_id + ": " + std::to_string(count) + (a.filter ? " filter views" : " render pairs") +
                 " written to " + a.out);
  return kExitOk;
}

int run_annotate(Context& ctx, const AssetOutArgs& a) {
  const auto& config = ctx.config();
  auto stack = make_client(config);
  auto asset = load_preprocessed(ctx, a.asset);
  if (!asset) return kExitPartial;
  const auto id = asset->asset_id;
  const auto views = render_filter_views(*asset, som_options(config));
  const auto quality = assess_quality(stack.client(), id, views);
  write_json_file(fs::path(a.out) / "quality.json", to_json(quality));
  if (quality_gate(quality) == GateResult::Fail) {
    const Reject r{"QualityGate", "score " + std::string(to_string(quality.score))};
    ctx.report(reject_json(id, "filter", r), reject_text(id, r));
    return kExitPartial;
  }
  const auto pairs = render_som_pairs(*asset, som_options(config));
  auto result = annotate_asset(*asset, stack.client(), pairs);
  if (auto* r = std::get_if<Reject>(&result)) {
    ctx.report(reject_json(id, "cluster", *r), reject_text(id, *r));
    return kExitPartial;
  }
  const auto& annotation = std::get<Annotation>(result);
  const auto doc = to_json(annotation);
  write_json_file(fs::path(a.out) / "annotation.json", doc);
  std::ostringstream text;
  text << id << ": " << annotation.clustering.clusters.size() << " clusters\n";
  for (const auto& c : annotation.clustering.clusters) {
    text << "  " << c.name << ":";
    for (int p : c.part_ids) text << " " << p;
    text << "\n";
  }
  ctx.report(doc, text.str());
  return kExitOk;
}

struct PostprocessArgs {
  std::string asset, annotation, out;
};

int run_postprocess(Context& ctx, const PostprocessArgs& a) {
  const auto config = pipeline_config(ctx.config(), a.out);
  const auto asset = load_asset(a.asset);
  const auto annotation = annotation_from_json(read_json_file(a.annotation));
  const auto record = postprocess_asset(asset, annotation, config);
  ctx.report(to_json(record), asset.asset_id + ": " + std::to_string(record.clusters.size()) +
                                  " watertight clusters written to " + (fs::path(a.out) / asset.asset_id).string());
  return kExitOk;
}

struct PipelineArgs {
  std::string catalog, exclude, out;
};

int run_pipeline_cmd(Context& ctx, const PipelineArgs& a) {
  const auto& config = ctx.config();
  const auto pconfig = pipeline_config(config, a.out);
  auto stack = make_client(config);
  const auto catalog = load_catalog(a.catalog);
  const auto excluded = a.exclude.empty() ? std::set<std::string>{} : load_exclusion_list(a.exclude);
  const auto entries = dedup(catalog, excluded);
  const auto result = run_pipeline(entries, pconfig, stack.client());
  std::ostringstream text;
  text << "accepted " << result.manifest.assets.size() << " assets (" << result.manifest.part_count()
       << " clusters), rejected " << result.rejections.entries.size() << "\n";
  for (const auto& [id, r] : result.rejections.entries) {
    text << "  " << id << ": " << to_string(r.stage) << " " << r.reason << "\n";
  }
  ctx.report({{"dataset", to_json(result.manifest)},
              {"rejections", to_json(result.rejections)},
              {"recomputed", result.recomputed}},
             text.str());
  return result.rejections.entries.empty() ? kExitOk : kExitPartial;
}

struct EpochArgs {
  std::string dataset, out;
};

int run_emit_epochs(Context& ctx, const EpochArgs& a) {
  const auto manifest = dataset_manifest_from_json(read_json_file(fs::path(a.dataset) / "dataset.json"));
  const auto summary = emit_epochs(manifest, a.dataset, a.out, epoch_options(ctx.config()));
  ctx.report({{"validation", summary.validation_ids},
              {"epochs", summary.epoch_orders},
              {"files_written", summary.files_written}},
             "emitted " + std::to_string(summary.epoch_orders.size()) + " epochs, " +
                 std::to_string(summary.validation_ids.size()) + " validation assets, " +
                 std::to_string(summary.files_written) + " files");
  return kExitOk;
}

struct EvalArgs {
  std::string gt, pred, out;
  std::optional<bool> ordered;
  std::optional<bool> squared;
  std::optional<double> tau;
  std::optional<int> points;
  std::optional<std::uint64_t> seed;
};

bool is_asset_dir(const fs::path& p) { return fs::is_regular_file(p / "manifest.json"); }

int run_eval(Context& ctx, const EvalArgs& a) {
  auto options = eval_options(ctx.config());
  if (a.ordered) options.ordered = *a.ordered;
  if (a.squared) options.squared_chamfer = *a.squared;
  if (a.tau) options.tau = *a.tau;
  if (a.points) options.n_points = static_cast<std::size_t>(*a.points);
  if (a.seed) options.seed = *a.seed;
  if (!(options.tau > 0.0)) throw InvalidValue("--tau must be positive");
  if (options.n_points == 0) throw InvalidValue("--points must be positive");

  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (is_asset_dir(a.gt)) {
    jobs.emplace_back(a.gt, a.pred);
  } else {
    if (!fs::is_directory(a.gt)) throw IoFailure("GT directory not found: " + a.gt);
    std::vector<fs::path> gts;
    for (const auto& e : fs::directory_iterator(a.gt)) {
      if (e.is_directory() && is_asset_dir(e.path())) gts.push_back(e.path());
    }
    std::sort(gts.begin(), gts.end());
    for (const auto& g : gts) jobs.emplace_back(g, fs::path(a.pred) / g.filename());
  }
  if (jobs.empty()) throw IoFailure("no GT assets under " + a.gt);

  std::vector<EvalReport> reports(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::exception_ptr fatal;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size()); ++i) {
    try {
      const auto gt = load_asset(jobs[i].first);
      MultiPartAsset pred;
      pred.asset_id = gt.asset_id;
      if (is_asset_dir(jobs[i].second)) {
        pred = load_asset(jobs[i].second);
      } else {
        failures[i] = "no prediction for " + gt.asset_id;
      }
      reports[i] = eval_object(gt, pred, options);
    } catch (const Error& e) {
      failures[i] = jobs[i].first.filename().string() + ": " + e.what();
    } catch (...) {
#pragma omp critical
      if (!fatal) fatal = std::current_exception();
    }
  }
  if (fatal) std::rethrow_exception(fatal);

  std::vector<EvalReport> scored;
  json per_object = json::array();
  bool partial = false;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!failures[i].empty()) {
      spdlog::warn("eval {}", failures[i]);
      partial = true;
    }
    if (reports[i].per_part.empty()) continue;
    scored.push_back(reports[i]);
    per_object.push_back(to_json(reports[i]));
  }
  if (scored.empty()) throw IoFailure("no asset could be evaluated");
  const auto row = aggregate(scored);
  const std::string table = format_table({{"ours", row}});
  const json doc{{"options",
                  {{"ordered", options.ordered},
                   {"tau", options.tau},
                   {"points", options.n_points},
                   {"seed", options.seed},
                   {"squared_chamfer", options.squared_chamfer}}},
                 {"aggregate", to_json(row)},
                 {"objects", per_object},
                 {"failures", [&] {
                    json f = json::array();
                    for (const auto& s : failures) {
                      if (!s.empty()) f.push_back(s);
                    }
                    return f;
                  }()}};
  if (!a.out.empty()) {
    write_json_file(fs::path(a.out) / "report.json", doc);
    write_file_if_changed(fs::path(a.out) / "table.txt", table);
  }
  ctx.report(doc, table);
  return partial ? kExitPartial : kExitOk;
}

struct FlowArgs {
  std::optional<std::uint64_t> seed;
  std::optional<int> draws;
};

int run_flow_check(Context& ctx, const FlowArgs& a) {
  const auto& config = ctx.config();
  const auto seed = a.seed.value_or(config.seeds.flow);
  const int draws = a.draws.value_or(config.flow.timestep_draws);
  if (draws < 1) throw InvalidValue("--draws must be positive");
  const auto results = run_flow_checks(seed, static_cast<std::size_t>(draws));
  bool ok = true;
  json rows = json::array();
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::ostringstream text;
  for (const auto& r : results) {
    ok = ok && r.passed;
    rows.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    text << (r.passed ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ') << r.detail
         << "\n";
  }
  ctx.report({{"passed", ok}, {"checks", rows}}, text.str());
  return ok ? kExitOk : kExitPartial;
}

struct PromptArgs {
  std::string schema, caption, target;
};

PartSchema read_schema(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoFailure("cannot read schema " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::string> names;
  const auto j = json::parse(text, nullptr, false);
  if (!j.is_discarded() && (j.is_array() || j.is_object())) {
    const auto& list = j.is_array() ? j : j.at("parts");
    for (const auto& n : list) names.push_back(n.get<std::string>());
  } else {
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
      if (!trim(line).empty()) names.push_back(trim(line));
    }
  }
  return PartSchema(std::move(names));
}

int run_prompt(Context& ctx, const PromptArgs& a) {
  const auto schema = read_schema(a.schema);
  json doc{{"stage1", build_stage1_prompt(a.caption, schema)}};
  std::string text = doc["stage1"].get<std::string>() + "\n";
  if (!a.target.empty()) {
    doc["stage2"] = build_stage2_prompt(schema, a.target);
    text += doc["stage2"].get<std::string>() + "\n";
  }
  ctx.report(doc, text);
  return kExitOk;
}

spdlog::level::level_enum parse_level(const std::string& s) {
  const auto level = spdlog::level::from_str(s);
  if (level == spdlog::level::off && s != "off") throw InvalidValue("unknown log level '" + s + "'");
  return level;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("partforge", sink);
  logger->set_pattern("[%H:%M:%S.%e] [%l] %v");
  spdlog::set_default_logger(logger);

  CLI::App app{"Multi-part 3D dataset curation, evaluation and flow-matching checks", "partforge"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_flag("--json", g.json_output, "Machine-readable report output");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Load, deduplicate and filter a catalog");
  c_ingest->add_option("--catalog", ingest.catalog, "catalog.json")->required();
  c_ingest->add_option("--exclude", ingest.exclude, "Exclusion id list");
  c_ingest->add_option("--out", ingest.out, "Write the deduplicated catalog here");

  AssetOutArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Drop degenerate parts, check the part window, normalize");
  c_pre->add_option("--asset", pre.asset, "Asset directory")->required();
  c_pre->add_option("--out", pre.out, "Output asset directory")->required();

  AssetOutArgs render;
  auto* c_render = app.add_subcommand("render-som", "Render Set-of-Mark pairs (or filter views)");
  c_render->add_option("--asset", render.asset, "Asset directory")->required();
  c_render->add_option("--out", render.out, "Output directory")->required();
  c_render->add_flag("--filter", render.filter, "Render the 8 plain filter views instead");

  AssetOutArgs annotate;
  auto* c_annotate = app.add_subcommand("annotate", "Quality filter and semantic clustering through the VLM client");
  c_annotate->add_option("--asset", annotate.asset, "Asset directory")->required();
  c_annotate->add_option("--out", annotate.out, "Output directory")->required();

  PostprocessArgs post;
  auto* c_post = app.add_subcommand("postprocess", "Watertight cluster meshes and point samples");
  c_post->add_option("--asset", post.asset, "Preprocessed asset directory")->required();
  c_post->add_option("--annotation", post.annotation, "annotation.json")->required();
  c_post->add_option("--out", post.out, "Dataset output root")->required();

  PipelineArgs pipe;
  auto* c_pipe = app.add_subcommand("run-pipeline", "Run every stage over a catalog");
  c_pipe->add_option("--catalog", pipe.catalog, "catalog.json")->required();
  c_pipe->add_option("--exclude", pipe.exclude, "Exclusion id list");
  c_pipe->add_option("--out", pipe.out, "Dataset output root")->required();

  EpochArgs epochs;
  auto* c_epochs = app.add_subcommand("emit-epochs", "Write FPS-subsampled training epochs");
  c_epochs->add_option("--dataset", epochs.dataset, "Dataset root holding dataset.json")->required();
  c_epochs->add_option("--out", epochs.out, "Output directory")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Part-level and holistic Chamfer distance and F-score");
  c_eval->add_option("--gt", ev.gt, "GT asset directory or directory of assets")->required();
  c_eval->add_option("--pred", ev.pred, "Prediction asset directory or directory of assets")->required();
  c_eval->add_flag("--ordered,!--unordered", ev.ordered, "Pair parts by position instead of greedy matching");
  c_eval->add_flag("--squared", ev.squared, "Squared-distance chamfer variant");
  c_eval->add_option("--tau", ev.tau, "F-score threshold");
  c_eval->add_option("--points", ev.points, "Points per cloud");
  c_eval->add_option("--seed", ev.seed, "Sampling seed");
  c_eval->add_option("--out", ev.out, "Directory for report.json and table.txt");

  FlowArgs flow;
  auto* c_flow = app.add_subcommand("flow-check", "Run the flow-matching and cross-part block invariant suite");
  c_flow->add_option("--seed", flow.seed, "Seed");
  c_flow->add_option("--draws", flow.draws, "Timestep draws for the median check");

  PromptArgs prompt;
  auto* c_prompt = app.add_subcommand("prompt", "Emit stage-1 and stage-2 conditioning prompts for a schema");
  c_prompt->add_option("--schema", prompt.schema, "Part names: JSON array, {\"parts\": [...]} or one per line")
      ->required();
  c_prompt->add_option("--caption", prompt.caption, "Global caption");
  c_prompt->add_option("--target", prompt.target, "Stage-2 target part");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitFatal;
  }

  try {
    logger->set_level(parse_level(g.log_level));
    Context ctx(g, out);
    if (c_ingest->parsed()) return run_ingest(ctx, ingest);
    if (c_pre->parsed()) return run_preprocess(ctx, pre);
    if (c_render->parsed()) return run_render_som(ctx, render);
    if (c_annotate->parsed()) return run_annotate(ctx, annotate);
    if (c_post->parsed()) return run_postprocess(ctx, post);
    if (c_pipe->parsed()) return run_pipeline_cmd(ctx, pipe);
    if (c_epochs->parsed()) return run_emit_epochs(ctx, epochs);
    if (c_eval->parsed()) return run_eval(ctx, ev);
    if (c_flow->parsed()) return run_flow_check(ctx, flow);
    if (c_prompt->parsed()) return run_prompt(ctx, prompt);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    err.flush();
    return kExitFatal;
  }
  err << app.help();
  return kExitFatal;
}

}  // namespace partforge::cli
