#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <spdlog/spdlog.h>

#include <thread>

#include "partforge/errors.hpp"
#include "partforge/vlm.hpp"

namespace partforge {

Clock steady_clock_fn() {
  return [] { return std::chrono::steady_clock::now(); };
}

Sleeper thread_sleeper() {
  return [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

TokenBucket::TokenBucket(double rate_per_second, double burst, Clock clock, Sleeper sleep)
    : rate_(rate_per_second), burst_(burst), tokens_(burst), clock_(std::move(clock)), sleep_(std::move(sleep)) {
  if (!(rate_ > 0.0) || !(burst_ >= 1.0)) throw InvalidArgument("token bucket needs rate > 0 and burst >= 1");
  last_ = clock_();
}

void TokenBucket::acquire() {
  double wait = 0.0;
  {
    std::lock_guard lock(mutex_);
    const auto now = clock_();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
    tokens_ -= 1.0;
    if (tokens_ < 0.0) wait = -tokens_ / rate_;
  }
  if (wait > 0.0) sleep_(std::chrono::duration<double>(wait));
}

Transport http_transport(const LiveClientOptions& options) {
  const auto& url = options.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string host = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
  const std::string key = options.api_key;
  const auto timeout = std::chrono::duration<double>(options.timeout_seconds);
  return [host, path, key, timeout](const std::string& body) {
    httplib::Client client(host);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) return HttpResult{0, {}, httplib::to_string(res.error())};
    return HttpResult{res->status, res->body, {}};
  };
}

LiveClient::LiveClient(LiveClientOptions options, Transport transport, Clock clock, Sleeper sleep)
    : options_(std::move(options)),
      transport_(transport ? std::move(transport) : http_transport(options_)),
      sleep_(sleep),
      bucket_(options_.requests_per_second, options_.burst, std::move(clock), sleep),
      in_flight_(std::max(1, options_.max_in_flight)) {
  if (options_.max_attempts < 1) throw InvalidArgument("max_attempts must be >= 1");
}

std::string LiveClient::complete(const VlmRequest& request, const std::string& asset_id) {
  const std::string body = request_body(request, options_.decoding).dump();
  double backoff = options_.backoff_initial_seconds;
  std::string last_error;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    bucket_.acquire();
    HttpResult res;
    in_flight_.acquire();
    try {
      res = transport_(body);
    } catch (const std::exception& e) {
      res = {0, {}, e.what()};
    }
    in_flight_.release();
    if (res.status >= 200 && res.status < 300) return res.body;
    last_error = res.status == 0 ? "transport error: " + res.error : "HTTP " + std::to_string(res.status);
    const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
    spdlog::warn("{} {} request attempt {}/{} failed: {}", asset_id, to_string(request.kind), attempt,
                 options_.max_attempts, last_error);
    if (!retryable) break;
    if (attempt < options_.max_attempts) {
      sleep_(std::chrono::duration<double>(backoff));
      backoff *= options_.backoff_factor;
    }
  }
  throw VlmError(asset_id + " " + std::string(to_string(request.kind)) + " request failed: " + last_error);
}

std::filesystem::path fixture_path(const std::filesystem::path& dir, const std::string& asset_id, RequestKind kind) {
  return dir / (asset_id + "." + std::string(to_string(kind)) + ".json");
}

RecordingClient::RecordingClient(VlmClient& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir)) {}

std::string RecordingClient::complete(const VlmRequest& request, const std::string& asset_id) {
  std::string body = inner_.complete(request, asset_id);
  std::filesystem::create_directories(dir_);
  write_file_if_changed(fixture_path(dir_, asset_id, request.kind), body);
  return body;
}

ReplayClient::ReplayClient(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ReplayClient::complete(const VlmRequest& request, const std::string& asset_id) {
  ++calls_;
  const auto path = fixture_path(dir_, asset_id, request.kind);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw VlmError("no replay fixture " + path.string());
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace partforge
