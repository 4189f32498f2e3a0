#include "partforge/asset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "partforge/errors.hpp"

namespace partforge {

namespace fs = std::filesystem;
using nlohmann::json;

double Mesh::surface_area() const {
  double area = 0.0;
  for (const auto& f : faces) area += triangle_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]);
  return area;
}

Aabb Mesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.expand(v);
  return box;
}

void validate_mesh(const Mesh& mesh, const std::string& part) {
  const auto n = mesh.vertices.size();
  for (const auto& f : mesh.faces) {
    for (auto idx : f) {
      if (idx >= n) {
        throw IndexOutOfRange(part, "part '" + part + "': face index " + std::to_string(idx) +
                                        " out of range for " + std::to_string(n) + " vertices");
      }
    }
  }
  for (const auto& v : mesh.vertices) {
    if (!is_finite(v)) throw MalformedMesh(part, "part '" + part + "': non-finite vertex coordinate");
  }
  if (mesh.has_normals()) {
    if (mesh.normals.size() != n) throw MalformedMesh(part, "part '" + part + "': normal count mismatch");
    for (const auto& nv : mesh.normals) {
      if (std::abs(norm(nv) - 1.0) > 1e-4) throw MalformedMesh(part, "part '" + part + "': non-unit normal");
    }
  }
  if (mesh.has_uvs() && mesh.uvs.size() != n) throw MalformedMesh(part, "part '" + part + "': uv count mismatch");
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Sketchfab: return "sketchfab";
    case Source::Commercial: return "commercial";
    case Source::Internal: return "internal";
    case Source::Synthetic: return "synthetic";
  }
  return "synthetic";
}

Source source_from_string(std::string_view s) {
  if (s == "sketchfab") return Source::Sketchfab;
  if (s == "commercial") return Source::Commercial;
  if (s == "internal") return Source::Internal;
  if (s == "synthetic") return Source::Synthetic;
  throw InvalidAsset("unknown source '" + std::string(s) + "'");
}

const Part* MultiPartAsset::find(std::string_view name) const {
  for (const auto& p : parts) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void validate_asset(const MultiPartAsset& asset) {
  if (asset.parts.empty()) throw InvalidAsset("asset '" + asset.asset_id + "' has no parts");
  std::set<std::string_view> seen;
  for (const auto& p : asset.parts) {
    if (!seen.insert(p.name).second) throw InvalidAsset("duplicate part name '" + p.name + "'");
  }
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::string case_fold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

PartSchema::PartSchema(std::vector<std::string> names) {
  if (names.empty()) throw InvalidSchema("part schema is empty");
  std::set<std::string> keys;
  for (auto& n : names) {
    n = trim(n);
    if (n.empty()) throw InvalidSchema("part schema contains an empty name");
    if (!keys.insert(case_fold(n)).second) throw InvalidSchema("duplicate part name '" + n + "'");
  }
  names_ = std::move(names);
}

bool PartSchema::contains(std::string_view name) const {
  const auto key = case_fold(trim(name));
  return std::any_of(names_.begin(), names_.end(), [&](const std::string& n) { return case_fold(n) == key; });
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Preprocess: return "preprocess";
    case Stage::Filter: return "filter";
    case Stage::Cluster: return "cluster";
    case Stage::Postprocess: return "postprocess";
  }
  return "preprocess";
}

Stage stage_from_string(std::string_view s) {
  for (auto st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  throw InvalidArgument("unknown stage '" + std::string(s) + "'");
}

void AssetManifest::record_stage(Stage s) {
  const int idx = static_cast<int>(s);
  if (idx < completed_) return;
  if (idx != completed_) {
    throw InvalidArgument("stage '" + std::string(to_string(s)) + "' recorded before its predecessors");
  }
  if (rejection_) throw InvalidArgument("cannot record stages on a rejected asset");
  ++completed_;
}

void AssetManifest::reject(Stage s, std::string reason) {
  if (static_cast<int>(s) > completed_) throw InvalidArgument("rejection recorded past the completed stage chain");
  rejection_ = Rejection{s, std::move(reason)};
}

// ---------------------------------------------------------------------------
// OBJ

namespace {

std::string_view next_token(std::string_view& line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  std::size_t j = i;
  while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
  auto tok = line.substr(i, j - i);
  line.remove_prefix(j);
  return tok;
}

double parse_double(std::string_view tok, const std::string& part) {
  double v = 0.0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw MalformedMesh(part, "part '" + part + "': bad number '" + std::string(tok) + "'");
  }
  return v;
}

long long parse_index(std::string_view tok, const std::string& part) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
    throw MalformedMesh(part, "part '" + part + "': bad face index '" + std::string(tok) + "'");
  }
  return v;
}

// OBJ indices are 1-based; negative values are relative to the current count.
// Positive indices are passed through unchecked so range errors surface later.
long long resolve_index(long long idx, std::size_t count, const std::string& part) {
  if (idx > 0) return idx - 1;
  const long long r = static_cast<long long>(count) + idx;
  if (r < 0) throw IndexOutOfRange(part, "part '" + part + "': relative face index out of range");
  return r;
}

}  // namespace

Mesh parse_obj(std::string_view text, const std::string& part, ObjStats* stats) {
  Mesh mesh;
  std::vector<Vec3> vn;
  std::vector<Vec2> vt;
  struct Corner {
    long long v, t, n;
  };
  std::vector<std::array<Corner, 3>> tris;
  std::size_t ignored = 0;

  while (!text.empty()) {
    auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto tag = next_token(line);
    if (tag.empty() || tag.front() == '#') continue;
    if (tag == "v") {
      Vec3 p;
      for (int i = 0; i < 3; ++i) p[i] = parse_double(next_token(line), part);
      mesh.vertices.push_back(p);
    } else if (tag == "vn") {
      Vec3 p;
      for (int i = 0; i < 3; ++i) p[i] = parse_double(next_token(line), part);
      vn.push_back(p);
    } else if (tag == "vt") {
      Vec2 t;
      t.u = parse_double(next_token(line), part);
      t.v = parse_double(next_token(line), part);
      vt.push_back(t);
    } else if (tag == "f") {
      std::vector<Corner> poly;
      for (auto tok = next_token(line); !tok.empty(); tok = next_token(line)) {
        Corner c{-1, -1, -1};
        const auto s1 = tok.find('/');
        c.v = resolve_index(parse_index(tok.substr(0, s1), part), mesh.vertices.size(), part);
        if (s1 != std::string_view::npos) {
          auto rest = tok.substr(s1 + 1);
          const auto s2 = rest.find('/');
          auto t_tok = rest.substr(0, s2);
          if (!t_tok.empty()) c.t = resolve_index(parse_index(t_tok, part), vt.size(), part);
          if (s2 != std::string_view::npos) {
            auto n_tok = rest.substr(s2 + 1);
            if (!n_tok.empty()) c.n = resolve_index(parse_index(n_tok, part), vn.size(), part);
          }
        }
        poly.push_back(c);
      }
      if (poly.size() < 3) throw MalformedMesh(part, "part '" + part + "': face with fewer than 3 corners");
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) tris.push_back({poly[0], poly[i], poly[i + 1]});
    } else {
      ++ignored;
    }
  }

  const auto nverts = mesh.vertices.size();
  mesh.faces.reserve(tris.size());
  std::vector<Vec3> normals(vn.empty() ? 0 : nverts);
  std::vector<Vec2> uvs(vt.empty() ? 0 : nverts);
  std::vector<char> has_n(normals.size(), 0), has_t(uvs.size(), 0);
  for (const auto& tri : tris) {
    Face f{};
    for (int k = 0; k < 3; ++k) {
      const auto& c = tri[k];
      if (c.v < 0 || static_cast<std::size_t>(c.v) >= nverts) {
        throw IndexOutOfRange(part, "part '" + part + "': face index " + std::to_string(c.v + 1) +
                                        " out of range for " + std::to_string(nverts) + " vertices");
      }
      f[k] = static_cast<std::uint32_t>(c.v);
      if (c.n >= 0 && !normals.empty()) {
        if (static_cast<std::size_t>(c.n) >= vn.size()) throw IndexOutOfRange(part, "part '" + part + "': normal index out of range");
        normals[c.v] = vn[c.n];
        has_n[c.v] = 1;
      }
      if (c.t >= 0 && !uvs.empty()) {
        if (static_cast<std::size_t>(c.t) >= vt.size()) throw IndexOutOfRange(part, "part '" + part + "': uv index out of range");
        uvs[c.v] = vt[c.t];
        has_t[c.v] = 1;
      }
    }
    mesh.faces.push_back(f);
  }
  // Per-vertex attributes are kept only when every vertex received one.
  if (!normals.empty() && std::all_of(has_n.begin(), has_n.end(), [](char c) { return c != 0; })) {
    for (auto& nv : normals) {
      const double len = norm(nv);
      if (len == 0.0 || !std::isfinite(len)) throw MalformedMesh(part, "part '" + part + "': zero-length normal");
      if (std::abs(len - 1.0) > 1e-4) nv = nv / len;
    }
    mesh.normals = std::move(normals);
  } else if (!normals.empty()) {
    ++ignored;
  }
  if (!uvs.empty() && std::all_of(has_t.begin(), has_t.end(), [](char c) { return c != 0; })) {
    mesh.uvs = std::move(uvs);
  } else if (!uvs.empty()) {
    ++ignored;
  }
  if (stats) stats->ignored_records += ignored;
  validate_mesh(mesh, part);
  return mesh;
}

Mesh read_obj(const fs::path& path, const std::string& part, ObjStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedMesh(part, "part '" + part + "': cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str(), part, stats);
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::string format_obj(const Mesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 48 + mesh.faces.size() * 24);
  for (const auto& v : mesh.vertices) {
    out += "v ";
    append_double(out, v.x);
    out += ' ';
    append_double(out, v.y);
    out += ' ';
    append_double(out, v.z);
    out += '\n';
  }
  for (const auto& t : mesh.uvs) {
    out += "vt ";
    append_double(out, t.u);
    out += ' ';
    append_double(out, t.v);
    out += '\n';
  }
  for (const auto& n : mesh.normals) {
    out += "vn ";
    append_double(out, n.x);
    out += ' ';
    append_double(out, n.y);
    out += ' ';
    append_double(out, n.z);
    out += '\n';
  }
  const bool t = mesh.has_uvs(), n = mesh.has_normals();
  for (const auto& f : mesh.faces) {
    out += 'f';
    for (auto idx : f) {
      const auto s = std::to_string(idx + 1);
      out += ' ';
      out += s;
      if (t || n) {
        out += '/';
        if (t) out += s;
        if (n) {
          out += '/';
          out += s;
        }
      }
    }
    out += '\n';
  }
  return out;
}

void write_obj(const fs::path& path, const Mesh& mesh) {
  write_file_if_changed(path, format_obj(mesh));
}

std::string sanitize_name(std::string_view name) {
  std::string out;
  for (unsigned char c : name) {
    out += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_';
  }
  if (out.empty()) out = "part";
  return out;
}

// ---------------------------------------------------------------------------
// Asset directories

MultiPartAsset load_asset(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw MissingManifest("no manifest.json in " + dir.string());
  json j;
  try {
    std::ifstream in(manifest_path);
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw MissingManifest("unreadable manifest " + manifest_path.string() + ": " + e.what());
  }
  MultiPartAsset asset;
  try {
    asset.asset_id = j.at("asset_id").get<std::string>();
    asset.source = source_from_string(j.value("source", std::string("synthetic")));
    if (j.contains("global_caption") && !j["global_caption"].is_null()) {
      asset.global_caption = j["global_caption"].get<std::string>();
    }
    for (const auto& pj : j.at("parts")) {
      Part part;
      part.name = pj.at("name").get<std::string>();
      const auto file = pj.at("file").get<std::string>();
      part.mesh = read_obj(dir / file, part.name);
      if (pj.contains("texture") && pj["texture"].is_string()) {
        part.mesh.texture_file = pj["texture"].get<std::string>();
        try {
          part.mesh.texture = std::make_shared<const Image>(read_png(dir / *part.mesh.texture_file));
        } catch (const IoFailure& e) {
          throw MalformedMesh(part.name, "part '" + part.name + "': texture: " + e.what());
        }
      }
      asset.parts.push_back(std::move(part));
    }
  } catch (const json::exception& e) {
    throw MissingManifest("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  validate_asset(asset);
  return asset;
}

AssetManifest save_asset(const MultiPartAsset& asset, const fs::path& dir) {
  validate_asset(asset);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());

  AssetManifest manifest;
  manifest.asset_id = asset.asset_id;
  json parts = json::array();
  for (std::size_t i = 0; i < asset.parts.size(); ++i) {
    const auto& p = asset.parts[i];
    validate_mesh(p.mesh, p.name);
    char prefix[16];
    std::snprintf(prefix, sizeof(prefix), "%02zu_", i);
    const std::string file = prefix + sanitize_name(p.name) + ".obj";
    write_obj(dir / file, p.mesh);
    json pj = {{"name", p.name}, {"file", file}};
    if (p.mesh.texture) {
      const std::string tex = prefix + sanitize_name(p.name) + ".png";
      write_png(dir / tex, *p.mesh.texture);
      pj["texture"] = tex;
    }
    parts.push_back(std::move(pj));
    manifest.parts.push_back({p.name, file, p.mesh.faces.size(), p.mesh.surface_area()});
  }
  json j = {{"asset_id", asset.asset_id},
            {"source", std::string(to_string(asset.source))},
            {"global_caption", asset.global_caption ? json(*asset.global_caption) : json(nullptr)},
            {"parts", std::move(parts)}};
  write_file_if_changed(dir / "manifest.json", j.dump(2) + "\n");
  return manifest;
}

Mesh concat_meshes(const std::vector<const Mesh*>& meshes) {
  Mesh out;
  std::size_t nv = 0, nf = 0;
  bool normals = !meshes.empty(), uvs = !meshes.empty();
  for (const auto* m : meshes) {
    nv += m->vertices.size();
    nf += m->faces.size();
    normals = normals && m->has_normals();
    uvs = uvs && m->has_uvs();
  }
  out.vertices.reserve(nv);
  out.faces.reserve(nf);
  for (const auto* m : meshes) {
    const auto offset = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), m->vertices.begin(), m->vertices.end());
    for (const auto& f : m->faces) out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
    if (normals) out.normals.insert(out.normals.end(), m->normals.begin(), m->normals.end());
    if (uvs) out.uvs.insert(out.uvs.end(), m->uvs.begin(), m->uvs.end());
  }
  return out;
}

Mesh concat_parts(const MultiPartAsset& asset) {
  if (asset.parts.empty()) throw InvalidAsset("concat_parts on an empty asset");
  std::vector<const Mesh*> meshes;
  for (const auto& p : asset.parts) meshes.push_back(&p.mesh);
  return concat_meshes(meshes);
}

}  // namespace partforge
