#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "partforge/asset.hpp"
#include "partforge/render.hpp"

namespace partforge {

// Prompt texts, byte-exact.
extern const std::string_view kFilterPrompt;
extern const std::string_view kClusterPrompt;

inline constexpr std::array<std::string_view, 15> kTagVocabulary{
    "mesh tearing",
    "3d scan",
    "cutaway view",
    "fragmented object",
    "multiple objects",
    "collection of objects",
    "mini-scene-like",
    "room section",
    "overly complex plants/foliage",
    "overly thin structures",
    "no recognizable object",
    "heavily occluded views",
    "zero volume mesh",
    "has baseplate",
    "empty image",
};

inline constexpr std::string_view kUnlabeled = "unlabeled";

enum class RequestKind { Filter, Cluster };
std::string_view to_string(RequestKind kind);

struct ViewAttachment {
  std::string name;
  std::vector<std::vector<std::uint8_t>> images;  // PNG bytes
};

struct VlmRequest {
  RequestKind kind = RequestKind::Filter;
  std::string text;
  std::vector<ViewAttachment> views;

  std::size_t image_count() const;
};

// Hash over the prompt text, view names and image bytes.
std::uint64_t request_hash(const VlmRequest& request);

// Views are re-sorted into rig order. Throws WrongViewCount, InvalidArgument
// for unknown or repeated view names.
VlmRequest build_filter_prompt(const std::vector<NamedImage>& views);
VlmRequest build_cluster_prompt(const std::vector<RenderPair>& pairs);

struct DecodingParams {
  std::string model;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
};

// {model, messages:[{role:"user", content:[{type:"text",...}, {type:"image",...}, ...]}]}
nlohmann::json request_body(const VlmRequest& request, const DecodingParams& params);

std::string base64_encode(std::span<const std::uint8_t> bytes);

// Message text of a chat-style completion body; the body itself when it is
// not such a document.
std::string extract_response_text(std::string_view body);

// ---------------------------------------------------------------------------
// Responses

enum class Complexity { Poor, Moderate, High };
enum class QualityTier { Poor, Moderate, Excellent };

std::string_view to_string(Complexity c);
std::string_view to_string(QualityTier t);
Complexity complexity_from_string(std::string_view s);  // throws InvalidTier
QualityTier tier_from_string(std::string_view s);       // throws InvalidTier

struct QualityReport {
  std::set<std::string> tags;  // vocabulary spelling
  std::optional<Complexity> geometric_complexity;
  std::optional<Complexity> texture_complexity;
  QualityTier score = QualityTier::Poor;
  std::string reasoning;
  std::string description;
  std::size_t raw_tag_count = 0;
  std::vector<std::string> dropped_tags;
  bool salvaged = false;  // parsed by key scanning after strict JSON failed
};

// Lenient: strips code fences, takes the first top-level object, tolerates
// trailing commas and falls back to key scanning. Throws Unparseable,
// MissingField("score") and InvalidTier.
QualityReport parse_filter_response(std::string_view text);

enum class GateResult { Pass, Fail };
GateResult quality_gate(const QualityReport& report);

struct Cluster {
  std::string name;
  std::set<int> part_ids;  // 1-based marker indices
  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct Clustering {
  std::vector<Cluster> clusters;
  friend bool operator==(const Clustering&, const Clustering&) = default;
};

struct Reject {
  std::string reason;
  std::string detail;
};

inline constexpr std::string_view kCollapsedStructure = "CollapsedStructure";

// Resolution rules: ids outside `visible_ids` are dropped; a repeated id stays
// in its first cluster; clusters left empty are dropped; visible ids never
// assigned become singleton clusters "part {id}" in ascending order; a single
// remaining cluster rejects the asset. Throws Unparseable and EmptyClustering.
std::variant<Clustering, Reject> parse_cluster_response(std::string_view text, const std::set<int>& visible_ids,
                                                        int total_parts);

struct Annotation {
  std::string asset_id;
  Clustering clustering;
  std::set<int> invisible_part_ids;  // 1-based
  std::string raw_response;
};

nlohmann::json to_json(const QualityReport& report);
QualityReport quality_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Annotation& annotation);
Annotation annotation_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Clients

class VlmClient {
 public:
  virtual ~VlmClient() = default;
  // Returns the raw response body. Throws VlmError.
  virtual std::string complete(const VlmRequest& request, const std::string& asset_id) = 0;
};

using Clock = std::function<std::chrono::steady_clock::time_point()>;
using Sleeper = std::function<void(std::chrono::duration<double>)>;

Clock steady_clock_fn();
Sleeper thread_sleeper();

// Token bucket; callers over budget reserve a future token and sleep.
class TokenBucket {
 public:
  TokenBucket(double rate_per_second, double burst, Clock clock = steady_clock_fn(),
              Sleeper sleep = thread_sleeper());
  void acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  Clock clock_;
  Sleeper sleep_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

struct HttpResult {
  int status = 0;  // 0 for transport failures
  std::string body;
  std::string error;
};

using Transport = std::function<HttpResult(const std::string& body)>;

struct LiveClientOptions {
  std::string endpoint;  // scheme://host[:port]/path
  std::string api_key;
  DecodingParams decoding;
  double timeout_seconds = 120.0;
  int max_attempts = 3;
  double backoff_initial_seconds = 1.0;
  double backoff_factor = 4.0;
  int max_in_flight = 4;
  double requests_per_second = 1.0;
  double burst = 4.0;
};

// HTTPS/HTTP transport posting JSON with a bearer key.
Transport http_transport(const LiveClientOptions& options);

// Retries transport failures, 429 and 5xx with exponential backoff; other
// statuses fail immediately. Thread-safe.
class LiveClient : public VlmClient {
 public:
  explicit LiveClient(LiveClientOptions options, Transport transport = {}, Clock clock = steady_clock_fn(),
                      Sleeper sleep = thread_sleeper());
  std::string complete(const VlmRequest& request, const std::string& asset_id) override;

 private:
  LiveClientOptions options_;
  Transport transport_;
  Sleeper sleep_;
  TokenBucket bucket_;
  std::counting_semaphore<> in_flight_;
};

std::filesystem::path fixture_path(const std::filesystem::path& dir, const std::string& asset_id, RequestKind kind);

// Forwards to `inner` and stores each body as a fixture.
class RecordingClient : public VlmClient {
 public:
  RecordingClient(VlmClient& inner, std::filesystem::path dir);
  std::string complete(const VlmRequest& request, const std::string& asset_id) override;

 private:
  VlmClient& inner_;
  std::filesystem::path dir_;
};

// Serves fixtures only; a missing fixture is a VlmError.
class ReplayClient : public VlmClient {
 public:
  explicit ReplayClient(std::filesystem::path dir);
  std::string complete(const VlmRequest& request, const std::string& asset_id) override;
  std::size_t calls() const { return calls_; }

 private:
  std::filesystem::path dir_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Annotation

// Queries the filter prompt (one retry on Unparseable).
QualityReport assess_quality(VlmClient& client, const std::string& asset_id, const std::vector<NamedImage>& views);

// Parts absent from every view are reported invisible; the rest are clustered.
std::variant<Annotation, Reject> annotate_asset(const MultiPartAsset& asset, VlmClient& client,
                                                const std::vector<RenderPair>& pairs);

}  // namespace partforge
