#include "partforge/vlm.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>

#include "partforge/errors.hpp"
#include "partforge/rng.hpp"

namespace partforge {

using nlohmann::json;

std::string_view to_string(RequestKind kind) { return kind == RequestKind::Filter ? "filter" : "cluster"; }

std::size_t VlmRequest::image_count() const {
  std::size_t n = 0;
  for (const auto& v : views) n += v.images.size();
  return n;
}

std::uint64_t request_hash(const VlmRequest& request) {
  std::uint64_t h = fnv1a64(to_string(request.kind));
  h = fnv1a64(request.text, h);
  for (const auto& v : request.views) {
    h = fnv1a64(v.name, h);
    for (const auto& img : v.images) h = fnv1a64(img, h);
  }
  return h;
}

namespace {

std::map<std::string, std::size_t> rig_order(RigMode mode) {
  std::map<std::string, std::size_t> order;
  const auto rig = build_camera_rig(mode);
  for (std::size_t i = 0; i < rig.size(); ++i) order.emplace(rig[i].name, i);
  return order;
}

template <typename T, typename NameOf>
std::vector<const T*> sort_by_rig(const std::vector<T>& items, RigMode mode, NameOf name_of) {
  const auto order = rig_order(mode);
  if (items.size() != order.size()) {
    throw WrongViewCount("expected " + std::to_string(order.size()) + " views, got " + std::to_string(items.size()));
  }
  std::vector<const T*> slots(order.size(), nullptr);
  for (const auto& item : items) {
    auto it = order.find(name_of(item));
    if (it == order.end()) throw InvalidArgument("unknown view name '" + name_of(item) + "'");
    if (slots[it->second]) throw InvalidArgument("repeated view name '" + name_of(item) + "'");
    slots[it->second] = &item;
  }
  return slots;
}

}  // namespace

VlmRequest build_filter_prompt(const std::vector<NamedImage>& views) {
  const auto sorted = sort_by_rig(views, RigMode::Filter8, [](const NamedImage& v) { return v.view_name; });
  VlmRequest req;
  req.kind = RequestKind::Filter;
  req.text = std::string(kFilterPrompt);
  for (const auto* v : sorted) req.views.push_back({v->view_name, {encode_png(v->image)}});
  return req;
}

VlmRequest build_cluster_prompt(const std::vector<RenderPair>& pairs) {
  const auto sorted = sort_by_rig(pairs, RigMode::Annotate14, [](const RenderPair& p) { return p.view_name; });
  VlmRequest req;
  req.kind = RequestKind::Cluster;
  req.text = std::string(kClusterPrompt);
  for (const auto* p : sorted) {
    req.views.push_back({p->view_name, {encode_png(p->textured_image), encode_png(p->colored_image)}});
  }
  return req;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

json request_body(const VlmRequest& request, const DecodingParams& params) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.text}});
  for (const auto& v : request.views) {
    content.push_back({{"type", "text"}, {"text", v.name + ":"}});
    for (const auto& img : v.images) {
      content.push_back({{"type", "image"}, {"media_type", "image/png"}, {"data", base64_encode(img)}});
    }
  }
  json body = {{"model", params.model},
               {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})}};
  if (params.temperature) body["temperature"] = *params.temperature;
  if (params.max_tokens) body["max_tokens"] = *params.max_tokens;
  return body;
}

std::string extract_response_text(std::string_view body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::string(body);
  if (auto it = j.find("choices"); it != j.end() && it->is_array() && !it->empty()) {
    const auto& first = (*it)[0];
    if (first.contains("message") && first["message"].contains("content") && first["message"]["content"].is_string()) {
      return first["message"]["content"].get<std::string>();
    }
  }
  if (auto it = j.find("content"); it != j.end() && it->is_array()) {
    std::string text;
    for (const auto& part : *it) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text")) {
        text += part["text"].get<std::string>();
      }
    }
    if (!text.empty()) return text;
  }
  return std::string(body);
}

// ---------------------------------------------------------------------------
// Tiers

std::string_view to_string(Complexity c) {
  switch (c) {
    case Complexity::Poor: return "poor";
    case Complexity::Moderate: return "moderate";
    case Complexity::High: return "high";
  }
  return "poor";
}

std::string_view to_string(QualityTier t) {
  switch (t) {
    case QualityTier::Poor: return "poor";
    case QualityTier::Moderate: return "moderate";
    case QualityTier::Excellent: return "excellent";
  }
  return "poor";
}

Complexity complexity_from_string(std::string_view s) {
  const auto v = case_fold(trim(s));
  if (v == "poor") return Complexity::Poor;
  if (v == "moderate") return Complexity::Moderate;
  if (v == "high") return Complexity::High;
  throw InvalidTier("unknown complexity '" + std::string(s) + "'");
}

QualityTier tier_from_string(std::string_view s) {
  const auto v = case_fold(trim(s));
  if (v == "poor") return QualityTier::Poor;
  if (v == "moderate") return QualityTier::Moderate;
  if (v == "excellent") return QualityTier::Excellent;
  throw InvalidTier("unknown quality tier '" + std::string(s) + "'");
}

GateResult quality_gate(const QualityReport& report) {
  return report.score == QualityTier::Poor ? GateResult::Fail : GateResult::Pass;
}

// ---------------------------------------------------------------------------
// Lenient JSON extraction

namespace {

std::string strip_code_fences(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return std::string(text);
  auto body_start = text.find('\n', open);
  if (body_start == std::string_view::npos) return std::string(text);
  ++body_start;
  const auto close = text.find("```", body_start);
  return std::string(text.substr(body_start, close == std::string_view::npos ? std::string_view::npos : close - body_start));
}

// First balanced {...} outside string literals; if never balanced, the rest
// of the text from the first brace.
std::optional<std::string> first_object(std::string_view text) {
  const auto start = text.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return std::string(text.substr(start, i - start + 1));
    }
  }
  return std::string(text.substr(start));
}

std::string remove_trailing_commas(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false, escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<json> parse_lenient(std::string_view text, std::string* object_text) {
  const auto obj = first_object(strip_code_fences(text));
  if (!obj) return std::nullopt;
  if (object_text) *object_text = *obj;
  json j = json::parse(*obj, nullptr, false);
  if (j.is_discarded()) j = json::parse(remove_trailing_commas(*obj), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

const std::vector<std::string>& filter_keys() {
  static const std::vector<std::string> keys{"tags", "geometric complexity", "texture complexity", "reasoning",
                                             "score", "description"};
  return keys;
}

std::string normalize_key(std::string_view key) {
  std::string k = case_fold(trim(key));
  std::replace(k.begin(), k.end(), '_', ' ');
  return k;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

// Key scanning for objects strict parsing rejects (unterminated strings and
// the like). Each value spans from its key to the next recognised key.
json salvage_object(std::string_view text) {
  struct Hit {
    std::size_t key_pos, value_pos;
    std::string key;
  };
  std::vector<Hit> hits;
  for (const auto& key : filter_keys()) {
    for (const std::string& spelled : {key, [&] {
                                         std::string u = key;
                                         std::replace(u.begin(), u.end(), ' ', '_');
                                         return u;
                                       }()}) {
      const std::string quoted = "\"" + spelled + "\"";
      std::size_t at = 0;
      bool found = false;
      while (!found && (at = text.find(quoted, at)) != std::string_view::npos) {
        std::size_t j = at + quoted.size();
        while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j < text.size() && text[j] == ':') {
          hits.push_back({at, j + 1, key});
          found = true;
        }
        at += quoted.size();
      }
      if (found) break;
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.key_pos < b.key_pos; });
  json out = json::object();
  for (std::size_t h = 0; h < hits.size(); ++h) {
    const std::size_t end = h + 1 < hits.size() ? hits[h + 1].key_pos : text.size();
    std::string_view v = text.substr(hits[h].value_pos, end - hits[h].value_pos);
    auto is_trailing = [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '}'; };
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && is_trailing(v.back())) v.remove_suffix(1);
    if (!v.empty() && v.front() == '[') {
      json arr = json::array();
      const auto close = v.find(']');
      const std::string_view inner = v.substr(1, close == std::string_view::npos ? std::string_view::npos : close - 1);
      std::size_t q = 0;
      while ((q = inner.find('"', q)) != std::string_view::npos) {
        const auto e = inner.find('"', q + 1);
        if (e == std::string_view::npos) break;
        arr.push_back(unescape(inner.substr(q + 1, e - q - 1)));
        q = e + 1;
      }
      out[hits[h].key] = std::move(arr);
    } else {
      if (!v.empty() && v.front() == '"') v.remove_prefix(1);
      if (!v.empty() && v.back() == '"') v.remove_suffix(1);
      out[hits[h].key] = unescape(v);
    }
  }
  return out;
}

std::string as_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump();
}

}  // namespace

QualityReport parse_filter_response(std::string_view text) {
  QualityReport r;
  std::string object_text;
  auto parsed = parse_lenient(text, &object_text);
  json j;
  if (parsed) {
    for (auto it = parsed->begin(); it != parsed->end(); ++it) j[normalize_key(it.key())] = it.value();
  } else {
    if (object_text.empty()) throw Unparseable("no JSON object in filter response");
    j = salvage_object(object_text);
    if (j.empty()) throw Unparseable("filter response has no recognisable fields");
    r.salvaged = true;
  }

  if (auto it = j.find("tags"); it != j.end()) {
    std::vector<std::string> raw;
    if (it->is_array()) {
      for (const auto& t : *it) {
        if (t.is_string()) raw.push_back(t.get<std::string>());
      }
    } else if (it->is_string() && !trim(it->get<std::string>()).empty()) {
      raw.push_back(it->get<std::string>());
    }
    r.raw_tag_count = raw.size();
    for (const auto& t : raw) {
      const auto folded = case_fold(trim(t));
      auto v = std::find(kTagVocabulary.begin(), kTagVocabulary.end(), folded);
      if (v != kTagVocabulary.end()) {
        r.tags.insert(std::string(*v));
      } else {
        r.dropped_tags.push_back(t);
      }
    }
  }
  auto score = j.find("score");
  if (score == j.end() || !score->is_string()) throw MissingField("score");
  r.score = tier_from_string(score->get<std::string>());
  if (auto it = j.find("geometric complexity"); it != j.end() && it->is_string()) {
    r.geometric_complexity = complexity_from_string(it->get<std::string>());
  }
  if (auto it = j.find("texture complexity"); it != j.end() && it->is_string()) {
    r.texture_complexity = complexity_from_string(it->get<std::string>());
  }
  if (auto it = j.find("reasoning"); it != j.end()) r.reasoning = trim(as_text(*it));
  if (auto it = j.find("description"); it != j.end()) r.description = trim(as_text(*it));
  return r;
}

std::variant<Clustering, Reject> parse_cluster_response(std::string_view text, const std::set<int>& visible_ids,
                                                        int total_parts) {
  auto parsed = parse_lenient(text, nullptr);
  if (!parsed) throw Unparseable("no JSON object in cluster response");
  auto it = parsed->find("semantic_clusters");
  if (it == parsed->end() || !it->is_array()) throw Unparseable("response lacks a semantic_clusters array");
  if (it->empty()) throw EmptyClustering("semantic_clusters is empty");

  auto as_id = [](const json& v) -> std::optional<int> {
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d)) return static_cast<int>(d);
    }
    if (v.is_string()) {
      const auto s = trim(v.get<std::string>());
      int out = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec == std::errc() && p == s.data() + s.size()) return out;
    }
    return std::nullopt;
  };

  Clustering result;
  std::set<int> assigned;
  for (const auto& c : *it) {
    if (!c.is_object()) continue;
    const std::string name = trim(c.contains("cluster_name") ? as_text(c["cluster_name"]) : std::string());
    if (name.empty()) continue;
    Cluster cluster{name, {}};
    if (auto ids = c.find("part_ids"); ids != c.end() && ids->is_array()) {
      for (const auto& v : *ids) {
        const auto id = as_id(v);
        if (!id || *id < 1 || *id > total_parts || !visible_ids.contains(*id)) continue;
        if (!assigned.insert(*id).second) continue;
        cluster.part_ids.insert(*id);
      }
    }
    if (!cluster.part_ids.empty()) result.clusters.push_back(std::move(cluster));
  }
  for (int id : visible_ids) {
    if (!assigned.contains(id)) result.clusters.push_back({"part " + std::to_string(id), {id}});
  }
  if (result.clusters.size() <= 1) {
    return Reject{std::string(kCollapsedStructure), "all visible parts fall into a single cluster"};
  }
  return result;
}

// ---------------------------------------------------------------------------
// JSON round trips

json to_json(const QualityReport& r) {
  json j = {{"tags", r.tags},
            {"score", to_string(r.score)},
            {"reasoning", r.reasoning},
            {"description", r.description},
            {"raw_tag_count", r.raw_tag_count},
            {"dropped_tags", r.dropped_tags},
            {"salvaged", r.salvaged}};
  j["geometric complexity"] = r.geometric_complexity ? json(to_string(*r.geometric_complexity)) : json(nullptr);
  j["texture complexity"] = r.texture_complexity ? json(to_string(*r.texture_complexity)) : json(nullptr);
  return j;
}

QualityReport quality_report_from_json(const json& j) {
  QualityReport r;
  r.tags = j.at("tags").get<std::set<std::string>>();
  r.score = tier_from_string(j.at("score").get<std::string>());
  r.reasoning = j.value("reasoning", "");
  r.description = j.value("description", "");
  r.raw_tag_count = j.value("raw_tag_count", std::size_t{0});
  r.dropped_tags = j.value("dropped_tags", std::vector<std::string>{});
  r.salvaged = j.value("salvaged", false);
  if (j.contains("geometric complexity") && j["geometric complexity"].is_string()) {
    r.geometric_complexity = complexity_from_string(j["geometric complexity"].get<std::string>());
  }
  if (j.contains("texture complexity") && j["texture complexity"].is_string()) {
    r.texture_complexity = complexity_from_string(j["texture complexity"].get<std::string>());
  }
  return r;
}

json to_json(const Annotation& a) {
  json clusters = json::array();
  for (const auto& c : a.clustering.clusters) clusters.push_back({{"cluster_name", c.name}, {"part_ids", c.part_ids}});
  return {{"asset_id", a.asset_id},
          {"semantic_clusters", std::move(clusters)},
          {"invisible_part_ids", a.invisible_part_ids},
          {"invisible_label", kUnlabeled},
          {"raw_response", a.raw_response}};
}

Annotation annotation_from_json(const json& j) {
  Annotation a;
  a.asset_id = j.at("asset_id").get<std::string>();
  for (const auto& c : j.at("semantic_clusters")) {
    a.clustering.clusters.push_back({c.at("cluster_name").get<std::string>(), c.at("part_ids").get<std::set<int>>()});
  }
  a.invisible_part_ids = j.at("invisible_part_ids").get<std::set<int>>();
  a.raw_response = j.value("raw_response", "");
  return a;
}

// ---------------------------------------------------------------------------
// Annotation

namespace {

template <typename Parse>
auto query_with_retry(VlmClient& client, const VlmRequest& request, const std::string& asset_id, Parse parse) {
  for (int attempt = 0;; ++attempt) {
    const std::string body = client.complete(request, asset_id);
    try {
      return parse(body);
    } catch (const Unparseable&) {
      if (attempt >= 1) throw;
    }
  }
}

}  // namespace

QualityReport assess_quality(VlmClient& client, const std::string& asset_id, const std::vector<NamedImage>& views) {
  const auto request = build_filter_prompt(views);
  return query_with_retry(client, request, asset_id,
                          [](const std::string& body) { return parse_filter_response(extract_response_text(body)); });
}

std::variant<Annotation, Reject> annotate_asset(const MultiPartAsset& asset, VlmClient& client,
                                                const std::vector<RenderPair>& pairs) {
  const auto request = build_cluster_prompt(pairs);
  const int total = static_cast<int>(asset.parts.size());
  std::set<int> visible;
  for (int id : visible_union(pairs)) visible.insert(id + 1);
  std::set<int> invisible;
  for (int id = 1; id <= total; ++id) {
    if (!visible.contains(id)) invisible.insert(id);
  }
  std::string raw;
  auto outcome = query_with_retry(client, request, asset.asset_id, [&](const std::string& body) {
    raw = body;
    return parse_cluster_response(extract_response_text(body), visible, total);
  });
  if (auto* reject = std::get_if<Reject>(&outcome)) return *reject;
  return Annotation{asset.asset_id, std::get<Clustering>(std::move(outcome)), std::move(invisible), std::move(raw)};
}

}  // namespace partforge
