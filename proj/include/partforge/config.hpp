#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "partforge/eval.hpp"
#include "partforge/pipeline.hpp"
#include "partforge/vlm.hpp"

namespace partforge {

enum class VlmMode { Replay, Record, Live };
std::string to_string(VlmMode mode);

struct GeometryConfig {
  int grid_resolution = 64;
  double grid_padding_fraction = 0.08;
  double iso_spacing_factor = kDefaultIsoSpacingFactor;
};

struct RenderConfig {
  int views = kAnnotateViewCount;
  int filter_views = kFilterViewCount;
  double rig_radius = kDefaultRigRadius;
  int image_size = kDefaultImageSize;
  int marker_radius = 14;
  int contour_width = 2;
  bool dump_id_buffers = false;
};

struct SamplingConfig {
  int points_per_sample = 8192;
  bool visibility_filter = true;
};

struct PipelineSection {
  int workers = 1;
  int progress_every = 10;
  int epochs = 1;
  int epoch_points = 2048;
  double validation_fraction = 0.02;
};

struct VlmConfig {
  VlmMode mode = VlmMode::Replay;
  std::string endpoint;
  std::string model;
  std::filesystem::path fixtures_dir = "vlm_fixtures";
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  double timeout_seconds = 120.0;
  int max_attempts = 3;
  int max_in_flight = 4;
  double requests_per_second = 1.0;
  double burst = 4.0;
};

struct EvalConfig {
  double tau = kDefaultTau;
  int points = static_cast<int>(kDefaultEvalPoints);
  bool ordered = false;
  bool squared_chamfer = false;
};

struct FlowConfig {
  int timestep_draws = 1'000'000;
};

struct SeedConfig {
  std::uint64_t pipeline = 0;
  std::uint64_t epochs = 0;
  std::uint64_t eval = 0;
  std::uint64_t flow = 0;
};

struct Config {
  GeometryConfig geometry;
  RenderConfig render;
  SamplingConfig sampling;
  PipelineSection pipeline;
  VlmConfig vlm;
  EvalConfig eval;
  FlowConfig flow;
  SeedConfig seeds;
};

inline constexpr const char* kApiKeyEnv = "PARTFORGE_VLM_API_KEY";

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Defaults, then the TOML file, then PARTFORGE_<SECTION>_<KEY> overrides.
// Relative paths resolve against the file's directory. Throws
// ConfigParseError, UnknownKey, InvalidValue, IoFailure.
Config load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());
Config parse_config(std::string_view toml_text, const std::filesystem::path& base_dir,
                    const EnvLookup& env = process_env());
// Defaults plus env overrides, no file.
Config default_config(const EnvLookup& env = process_env());

// Throws InvalidValue.
void validate(const Config& config);

nlohmann::json to_json(const Config& config);

PipelineConfig pipeline_config(const Config& config, const std::filesystem::path& output_root);
EpochOptions epoch_options(const Config& config);
EvalOptions eval_options(const Config& config);
SomOptions som_options(const Config& config);

// Owns the client stack selected by vlm.mode. Live and record modes need the
// API key; without it this throws ConfigError before any work is done.
struct ClientStack {
  std::unique_ptr<VlmClient> inner;
  std::unique_ptr<VlmClient> outer;
  VlmClient& client() { return outer ? *outer : *inner; }
};
ClientStack make_client(const Config& config, const EnvLookup& env = process_env());

}  // namespace partforge
