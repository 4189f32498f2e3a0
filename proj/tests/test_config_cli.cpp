#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "partforge/config.hpp"
#include "partforge/errors.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using namespace partforge;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "partforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) {
      ::setenv(name, value, 1);
    } else {
      ::unsetenv(name);
    }
  }
  ~ScopedEnv() {
    if (old_) {
      ::setenv(name_.c_str(), old_->c_str(), 1);
    } else {
      ::unsetenv(name_.c_str());
    }
  }

 private:
  std::string name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST(Config, MinimalFileFillsDefaults) {
  const auto c = parse_config("[vlm]\nmode = \"replay\"\n", "/base", env_of({}));
  EXPECT_DOUBLE_EQ(c.eval.tau, 0.1);
  EXPECT_EQ(c.geometry.grid_resolution, 64);
  EXPECT_EQ(c.render.views, 14);
  EXPECT_EQ(c.render.filter_views, 8);
  EXPECT_EQ(c.sampling.points_per_sample, 8192);
  EXPECT_EQ(c.vlm.mode, VlmMode::Replay);
  EXPECT_EQ(c.vlm.fixtures_dir, fs::path("/base") / "vlm_fixtures");
  EXPECT_FALSE(c.vlm.temperature.has_value());
  EXPECT_FALSE(c.vlm.max_tokens.has_value());
}

TEST(Config, FixtureFileLoadsAndResolvesRelativePaths) {
  const fs::path file = fs::path(PARTFORGE_FIXTURE_DIR) / "config.toml";
  const auto c = load_config(file, env_of({}));
  EXPECT_EQ(c.vlm.mode, VlmMode::Replay);
  EXPECT_EQ(c.vlm.fixtures_dir, fs::absolute(file).parent_path() / "vlm");
}

TEST(Config, EnvironmentOverridesFile) {
  const auto c = parse_config("[vlm]\nmode = \"live\"\n[eval]\ntau = 0.2\n", "/base",
                              env_of({{"PARTFORGE_VLM_MODE", "replay"}, {"PARTFORGE_EVAL_TAU", "0.05"}}));
  EXPECT_EQ(c.vlm.mode, VlmMode::Replay);
  EXPECT_DOUBLE_EQ(c.eval.tau, 0.05);
}

TEST(Config, RejectsInvalidValues) {
  EXPECT_THROW(parse_config("[geometry]\ngrid_resolution = 7\n", "/b", env_of({})), InvalidValue);
  EXPECT_THROW(parse_config("[eval]\ntau = 0.0\n", "/b", env_of({})), InvalidValue);
  EXPECT_THROW(parse_config("[vlm]\nmode = \"sometimes\"\n", "/b", env_of({})), InvalidValue);
  EXPECT_THROW(parse_config("", "/b", env_of({{"PARTFORGE_GEOMETRY_GRID_RESOLUTION", "7"}})), InvalidValue);
}

TEST(Config, RejectsUnknownKeysAndBadSyntax) {
  EXPECT_THROW(parse_config("[geometry]\nresolution = 64\n", "/b", env_of({})), UnknownKey);
  EXPECT_THROW(parse_config("[nonsense]\nx = 1\n", "/b", env_of({})), UnknownKey);
  EXPECT_THROW(parse_config("[geometry\n", "/b", env_of({})), ConfigParseError);
  EXPECT_THROW(load_config("/nonexistent/partforge.toml", env_of({})), IoFailure);
}

TEST(Config, JsonDumpRoundTripsThroughText) {
  const auto c = parse_config("[eval]\ntau = 0.25\n", "/b", env_of({}));
  const auto j = to_json(c);
  EXPECT_DOUBLE_EQ(j.at("eval").at("tau").get<double>(), 0.25);
  EXPECT_EQ(j.at("geometry").at("grid_resolution").get<int>(), 64);
}

TEST(Config, LiveModeWithoutKeyFailsBeforeWork) {
  const auto c = parse_config("[vlm]\nmode = \"live\"\nendpoint = \"http://127.0.0.1:1/v1\"\nmodel = \"m\"\n", "/b",
                              env_of({}));
  EXPECT_THROW(make_client(c, env_of({})), ConfigError);
  EXPECT_THROW(make_client(c, env_of({{kApiKeyEnv, ""}})), ConfigError);
  const auto rec = parse_config("[vlm]\nmode = \"record\"\nendpoint = \"http://127.0.0.1:1/v1\"\nmodel = \"m\"\n", "/b", env_of({}));
  EXPECT_THROW(make_client(rec, env_of({})), ConfigError);
  const auto replay = parse_config("[vlm]\nmode = \"replay\"\n", "/b", env_of({}));
  EXPECT_NO_THROW(make_client(replay, env_of({})));
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, cli::kExitFatal);
  EXPECT_NE(r.err.find("run-pipeline"), std::string::npos);
}

TEST(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run_cli({}).code, cli::kExitFatal); }

TEST(Cli, MissingConfigFileIsFatal) {
  EXPECT_EQ(run_cli({"--config", "missing.toml", "run-pipeline", "--catalog", "c.json", "--out", "o"}).code,
            cli::kExitFatal);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run_cli({"--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("flow-check"), std::string::npos);
}

TEST(Cli, FlowCheckPasses) {
  const auto r = run_cli({"--log-level", "off", "flow-check", "--draws", "200000"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.out << r.err;
}

TEST(Cli, LiveModeWithoutKeyExitsBeforeWriting) {
  fixtures::TempDir tmp;
  const fs::path cfg = tmp.path() / "live.toml";
  std::ofstream(cfg) << "[vlm]\nmode = \"live\"\nendpoint = \"http://127.0.0.1:1/v1\"\nmodel = \"m\"\n";
  ScopedEnv key(kApiKeyEnv, nullptr);
  ScopedEnv mode("PARTFORGE_VLM_MODE", nullptr);
  const fs::path out = tmp.path() / "out";
  const auto r = run_cli({"--log-level", "off", "--config", cfg.string(), "run-pipeline", "--catalog",
                          (fs::path(PARTFORGE_FIXTURE_DIR) / "catalog.json").string(), "--out", out.string()});
  EXPECT_EQ(r.code, cli::kExitFatal);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, PromptEmitsBothStages) {
  const auto r = run_cli({"--log-level", "off", "prompt", "--schema",
                          (fs::path(PARTFORGE_FIXTURE_DIR) / "schema_car.json").string(), "--caption", "a red car",
                          "--target", "wheels"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("a red car"), std::string::npos);
}

TEST(Cli, PromptWithUnknownTargetIsFatal) {
  const auto r = run_cli({"--log-level", "off", "prompt", "--schema",
                          (fs::path(PARTFORGE_FIXTURE_DIR) / "schema_car.json").string(), "--target", "wing"});
  EXPECT_EQ(r.code, cli::kExitFatal);
}
