#include "partforge/config.hpp"

#include <spdlog/spdlog.h>

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <variant>

#include "partforge/errors.hpp"
#include "toml.hpp"

namespace partforge {

std::string to_string(VlmMode mode) {
  switch (mode) {
    case VlmMode::Replay: return "replay";
    case VlmMode::Record: return "record";
    case VlmMode::Live: return "live";
  }
  return "replay";
}

namespace {

using Target = std::variant<int*, double*, bool*, std::string*, std::uint64_t*, std::optional<double>*,
                            std::optional<int>*, std::filesystem::path*, VlmMode*>;

struct Field {
  const char* section;
  const char* key;
  Target target;
};

std::vector<Field> fields(Config& c) {
  return {
      {"geometry", "grid_resolution", &c.geometry.grid_resolution},
      {"geometry", "grid_padding_fraction", &c.geometry.grid_padding_fraction},
      {"geometry", "iso_spacing_factor", &c.geometry.iso_spacing_factor},
      {"render", "views", &c.render.views},
      {"render", "filter_views", &c.render.filter_views},
      {"render", "rig_radius", &c.render.rig_radius},
      {"render", "image_size", &c.render.image_size},
      {"render", "marker_radius", &c.render.marker_radius},
      {"render", "contour_width", &c.render.contour_width},
      {"render", "dump_id_buffers", &c.render.dump_id_buffers},
      {"sampling", "points_per_sample", &c.sampling.points_per_sample},
      {"sampling", "visibility_filter", &c.sampling.visibility_filter},
      {"pipeline", "workers", &c.pipeline.workers},
      {"pipeline", "progress_every", &c.pipeline.progress_every},
      {"pipeline", "epochs", &c.pipeline.epochs},
      {"pipeline", "epoch_points", &c.pipeline.epoch_points},
      {"pipeline", "validation_fraction", &c.pipeline.validation_fraction},
      {"vlm", "mode", &c.vlm.mode},
      {"vlm", "endpoint", &c.vlm.endpoint},
      {"vlm", "model", &c.vlm.model},
      {"vlm", "fixtures_dir", &c.vlm.fixtures_dir},
      {"vlm", "temperature", &c.vlm.temperature},
      {"vlm", "max_tokens", &c.vlm.max_tokens},
      {"vlm", "timeout_seconds", &c.vlm.timeout_seconds},
      {"vlm", "max_attempts", &c.vlm.max_attempts},
      {"vlm", "max_in_flight", &c.vlm.max_in_flight},
      {"vlm", "requests_per_second", &c.vlm.requests_per_second},
      {"vlm", "burst", &c.vlm.burst},
      {"eval", "tau", &c.eval.tau},
      {"eval", "points", &c.eval.points},
      {"eval", "ordered", &c.eval.ordered},
      {"eval", "squared_chamfer", &c.eval.squared_chamfer},
      {"flow", "timestep_draws", &c.flow.timestep_draws},
      {"seeds", "pipeline", &c.seeds.pipeline},
      {"seeds", "epochs", &c.seeds.epochs},
      {"seeds", "eval", &c.seeds.eval},
      {"seeds", "flow", &c.seeds.flow},
  };
}

std::string dotted(const Field& f) { return std::string(f.section) + "." + f.key; }

VlmMode parse_mode(const std::string& s, const std::string& where) {
  if (s == "replay") return VlmMode::Replay;
  if (s == "record") return VlmMode::Record;
  if (s == "live") return VlmMode::Live;
  throw InvalidValue(where + ": expected replay, record or live, got '" + s + "'");
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidValue(where + ": cannot parse '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s, const std::string& where) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw InvalidValue(where + ": expected true or false, got '" + s + "'");
}

void assign_from_string(const Field& f, const std::string& s, const std::filesystem::path& base_dir) {
  const std::string where = dotted(f);
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, int>) {
          *p = parse_number<int>(s, where);
        } else if constexpr (std::is_same_v<T, double>) {
          *p = parse_number<double>(s, where);
        } else if constexpr (std::is_same_v<T, bool>) {
          *p = parse_bool(s, where);
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = s;
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          *p = parse_number<std::uint64_t>(s, where);
        } else if constexpr (std::is_same_v<T, std::optional<double>>) {
          *p = parse_number<double>(s, where);
        } else if constexpr (std::is_same_v<T, std::optional<int>>) {
          *p = parse_number<int>(s, where);
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
          std::filesystem::path v(s);
          *p = v.is_relative() ? base_dir / v : v;
        } else if constexpr (std::is_same_v<T, VlmMode>) {
          *p = parse_mode(s, where);
        }
      },
      f.target);
}

[[noreturn]] void type_error(const std::string& where, const char* expected) {
  throw InvalidValue(where + ": expected " + expected);
}

void assign_from_node(const Field& f, const toml::node& node, const std::filesystem::path& base_dir) {
  const std::string where = dotted(f);
  auto as_int = [&]() -> std::int64_t {
    if (auto v = node.value_exact<std::int64_t>()) return *v;
    type_error(where, "an integer");
  };
  auto as_double = [&]() -> double {
    if (auto v = node.value_exact<double>()) return *v;
    if (auto v = node.value_exact<std::int64_t>()) return static_cast<double>(*v);
    type_error(where, "a number");
  };
  auto as_string = [&]() -> std::string {
    if (auto v = node.value_exact<std::string>()) return *v;
    type_error(where, "a string");
  };
  auto as_int32 = [&]() -> int {
    const auto v = as_int();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) type_error(where, "a 32-bit integer");
    return static_cast<int>(v);
  };
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::optional<int>>) {
          *p = as_int32();
        } else if constexpr (std::is_same_v<T, double> || std::is_same_v<T, std::optional<double>>) {
          *p = as_double();
        } else if constexpr (std::is_same_v<T, bool>) {
          if (auto v = node.value_exact<bool>()) {
            *p = *v;
          } else {
            type_error(where, "a boolean");
          }
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = as_string();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          const auto v = as_int();
          if (v < 0) type_error(where, "a non-negative integer");
          *p = static_cast<std::uint64_t>(v);
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
          std::filesystem::path v(as_string());
          *p = v.is_relative() ? base_dir / v : v;
        } else if constexpr (std::is_same_v<T, VlmMode>) {
          *p = parse_mode(as_string(), where);
        }
      },
      f.target);
}

std::string env_name(const Field& f) {
  std::string s = std::string("PARTFORGE_") + f.section + "_" + f.key;
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

void apply_env(Config& c, const EnvLookup& env, const std::filesystem::path& cwd) {
  for (const auto& f : fields(c)) {
    if (auto v = env(env_name(f))) assign_from_string(f, *v, cwd);
  }
}

Config finish(Config c, const EnvLookup& env) {
  apply_env(c, env, std::filesystem::current_path());
  validate(c);
  spdlog::info("config {}", to_json(c).dump());
  return c;
}

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

Config parse_config(std::string_view toml_text, const std::filesystem::path& base_dir, const EnvLookup& env) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigParseError(os.str());
  }
  Config c;
  c.vlm.fixtures_dir = base_dir / c.vlm.fixtures_dir;
  auto table = fields(c);
  for (const auto& [section, node] : root) {
    const auto* sub = node.as_table();
    if (!sub) throw UnknownKey("unknown top-level key '" + std::string(section.str()) + "'");
    for (const auto& [key, value] : *sub) {
      const Field* match = nullptr;
      for (const auto& f : table) {
        if (section.str() == f.section && key.str() == f.key) match = &f;
      }
      if (!match) throw UnknownKey("unknown config key '" + std::string(section.str()) + "." + std::string(key.str()) + "'");
      assign_from_node(*match, value, base_dir);
    }
  }
  return finish(std::move(c), env);
}

Config load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto base = std::filesystem::absolute(path).parent_path();
  return parse_config(ss.str(), base, env);
}

Config default_config(const EnvLookup& env) {
  Config c;
  c.vlm.fixtures_dir = std::filesystem::current_path() / c.vlm.fixtures_dir;
  return finish(std::move(c), env);
}

void validate(const Config& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw InvalidValue(msg);
  };
  require(c.geometry.grid_resolution >= 8 && c.geometry.grid_resolution <= 512,
          "geometry.grid_resolution must be in [8, 512]");
  require(c.geometry.grid_padding_fraction > 0.0 && c.geometry.grid_padding_fraction < 1.0,
          "geometry.grid_padding_fraction must be in (0, 1)");
  require(c.geometry.iso_spacing_factor > 0.0, "geometry.iso_spacing_factor must be positive");
  require(c.render.views == kAnnotateViewCount, "render.views must be 14");
  require(c.render.filter_views == kFilterViewCount, "render.filter_views must be 8");
  require(c.render.rig_radius > 1.7320508075688772, "render.rig_radius must exceed sqrt(3)");
  require(c.render.image_size >= 64 && c.render.image_size <= 4096, "render.image_size must be in [64, 4096]");
  require(c.render.marker_radius >= 4, "render.marker_radius must be at least 4");
  require(c.render.contour_width >= 1, "render.contour_width must be at least 1");
  require(c.sampling.points_per_sample >= 1, "sampling.points_per_sample must be positive");
  require(c.pipeline.workers >= 1, "pipeline.workers must be positive");
  require(c.pipeline.progress_every >= 1, "pipeline.progress_every must be positive");
  require(c.pipeline.epochs >= 1, "pipeline.epochs must be positive");
  require(c.pipeline.epoch_points >= 1, "pipeline.epoch_points must be positive");
  require(c.pipeline.validation_fraction >= 0.0 && c.pipeline.validation_fraction < 1.0,
          "pipeline.validation_fraction must be in [0, 1)");
  if (c.vlm.mode != VlmMode::Replay) {
    require(!c.vlm.endpoint.empty(), "vlm.endpoint is required outside replay mode");
    require(!c.vlm.model.empty(), "vlm.model is required outside replay mode");
  }
  if (c.vlm.temperature) require(*c.vlm.temperature >= 0.0, "vlm.temperature must be non-negative");
  if (c.vlm.max_tokens) require(*c.vlm.max_tokens >= 1, "vlm.max_tokens must be positive");
  require(c.vlm.timeout_seconds > 0.0, "vlm.timeout_seconds must be positive");
  require(c.vlm.max_attempts >= 1, "vlm.max_attempts must be positive");
  require(c.vlm.max_in_flight >= 1, "vlm.max_in_flight must be positive");
  require(c.vlm.requests_per_second > 0.0, "vlm.requests_per_second must be positive");
  require(c.vlm.burst >= 1.0, "vlm.burst must be at least 1");
  require(c.eval.tau > 0.0, "eval.tau must be positive");
  require(c.eval.points >= 1, "eval.points must be positive");
  require(c.flow.timestep_draws >= 1, "flow.timestep_draws must be positive");
}

nlohmann::json to_json(const Config& config) {
  Config copy = config;
  nlohmann::json out = nlohmann::json::object();
  for (const auto& f : fields(copy)) {
    auto& slot = out[f.section][f.key];
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, std::optional<double>> || std::is_same_v<T, std::optional<int>>) {
            slot = *p ? nlohmann::json(**p) : nlohmann::json(nullptr);
          } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
            slot = p->generic_string();
          } else if constexpr (std::is_same_v<T, VlmMode>) {
            slot = to_string(*p);
          } else {
            slot = *p;
          }
        },
        f.target);
  }
  return out;
}

SomOptions som_options(const Config& c) {
  SomOptions o;
  o.rig_radius = c.render.rig_radius;
  o.image_size = c.render.image_size;
  o.marker_radius = c.render.marker_radius;
  o.contour_width = c.render.contour_width;
  return o;
}

PipelineConfig pipeline_config(const Config& c, const std::filesystem::path& output_root) {
  PipelineConfig p;
  p.output_root = output_root;
  p.grid_resolution = c.geometry.grid_resolution;
  p.grid_padding_fraction = c.geometry.grid_padding_fraction;
  p.iso_spacing_factor = c.geometry.iso_spacing_factor;
  p.points_per_sample = static_cast<std::size_t>(c.sampling.points_per_sample);
  p.visibility_filter = c.sampling.visibility_filter;
  p.workers = c.pipeline.workers;
  p.seed = c.seeds.pipeline;
  p.som = som_options(c);
  p.dump_id_buffers = c.render.dump_id_buffers;
  p.progress_every = static_cast<std::size_t>(c.pipeline.progress_every);
  return p;
}

EpochOptions epoch_options(const Config& c) {
  EpochOptions e;
  e.epochs = c.pipeline.epochs;
  e.points_per_sample = static_cast<std::size_t>(c.pipeline.epoch_points);
  e.seed = c.seeds.epochs;
  e.validation_fraction = c.pipeline.validation_fraction;
  return e;
}

EvalOptions eval_options(const Config& c) {
  EvalOptions e;
  e.ordered = c.eval.ordered;
  e.n_points = static_cast<std::size_t>(c.eval.points);
  e.tau = c.eval.tau;
  e.seed = c.seeds.eval;
  e.squared_chamfer = c.eval.squared_chamfer;
  return e;
}

ClientStack make_client(const Config& c, const EnvLookup& env) {
  ClientStack stack;
  if (c.vlm.mode == VlmMode::Replay) {
    stack.inner = std::make_unique<ReplayClient>(c.vlm.fixtures_dir);
    return stack;
  }
  const auto key = env(kApiKeyEnv);
  if (!key || key->empty()) {
    throw ConfigError(std::string("vlm.mode ") + to_string(c.vlm.mode) + " requires " + kApiKeyEnv);
  }
  LiveClientOptions o;
  o.endpoint = c.vlm.endpoint;
  o.api_key = *key;
  o.decoding = DecodingParams{c.vlm.model, c.vlm.temperature, c.vlm.max_tokens};
  o.timeout_seconds = c.vlm.timeout_seconds;
  o.max_attempts = c.vlm.max_attempts;
  o.max_in_flight = c.vlm.max_in_flight;
  o.requests_per_second = c.vlm.requests_per_second;
  o.burst = c.vlm.burst;
  stack.inner = std::make_unique<LiveClient>(std::move(o));
  if (c.vlm.mode == VlmMode::Record) {
    stack.outer = std::make_unique<RecordingClient>(*stack.inner, c.vlm.fixtures_dir);
  }
  return stack;
}

}  // namespace partforge
