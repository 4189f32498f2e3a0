#include "partforge/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <numeric>
#include <unordered_map>

#include "partforge/errors.hpp"

namespace partforge {

Mesh NormalizationTransform::apply(const Mesh& m) const {
  Mesh out = m;
  for (auto& v : out.vertices) v = apply(v);
  return out;
}

NormalizationTransform unit_box_transform(const MultiPartAsset& asset) {
  if (asset.parts.empty()) throw InvalidAsset("cannot normalize an empty asset");
  Aabb box;
  for (const auto& p : asset.parts) {
    for (const auto& v : p.mesh.vertices) {
      if (!is_finite(v)) throw InvalidArgument("non-finite vertex in part '" + p.name + "'");
      box.expand(v);
    }
  }
  if (box.empty()) throw ZeroExtent("asset '" + asset.asset_id + "' has no vertices");
  const Vec3 e = box.extent();
  const double longest = std::max({e.x, e.y, e.z});
  if (!(longest > 0.0)) throw ZeroExtent("asset '" + asset.asset_id + "' has zero extent");
  return {box.center(), 2.0 / longest};
}

std::pair<MultiPartAsset, NormalizationTransform> normalize_to_unit_box(const MultiPartAsset& asset) {
  const auto t = unit_box_transform(asset);
  MultiPartAsset out = asset;
  for (auto& p : out.parts) {
    for (auto& v : p.mesh.vertices) v = t.apply(v);
  }
  return {std::move(out), t};
}

DegenerateFlags detect_degenerate(const Mesh& mesh) {
  DegenerateFlags flags;
  if (mesh.faces.empty()) flags.set(DegenerateFlag::Empty);
  bool finite = true;
  for (const auto& v : mesh.vertices) finite = finite && is_finite(v);
  if (!finite) flags.set(DegenerateFlag::NanVertices);
  if (!mesh.faces.empty() && finite && mesh.surface_area() < kDegenerateAreaEpsilon) {
    flags.set(DegenerateFlag::ZeroArea);
  }
  return flags;
}

GridSpec fit_grid(const Aabb& bounds, int resolution, double padding) {
  if (resolution < 8) throw InvalidArgument("grid resolution must be >= 8");
  if (bounds.empty()) throw DegenerateInput("cannot fit a grid to empty bounds");
  const Vec3 e = bounds.extent();
  const double side = std::max({e.x, e.y, e.z}) + 2.0 * padding;
  if (!(side > 0.0)) throw DegenerateInput("grid side must be positive");
  GridSpec spec;
  spec.resolution = resolution;
  spec.spacing = side / (resolution - 1);
  const double half = 0.5 * spec.spacing * (resolution - 1);
  const Vec3 c = bounds.center();
  spec.origin = {c.x - half, c.y - half, c.z - half};
  return spec;
}

// ---------------------------------------------------------------------------
// Topology

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ManifoldReport check_manifold(const Mesh& mesh) {
  ManifoldReport r;
  struct EdgeInfo {
    std::uint32_t count = 0;
    int forward = 0;  // faces traversing min->max minus faces traversing max->min
  };
  std::unordered_map<std::uint64_t, EdgeInfo> edges;
  edges.reserve(mesh.faces.size() * 2);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[k], b = f[(k + 1) % 3];
      auto& e = edges[edge_key(a, b)];
      ++e.count;
      e.forward += a < b ? 1 : -1;
    }
  }
  bool oriented = true;
  for (const auto& [key, e] : edges) {
    if (e.count == 1) ++r.boundary_edge_count;
    if (e.count >= 3) ++r.non_manifold_edge_count;
    if (e.count == 2 && e.forward != 0) oriented = false;
  }

  // Vertex links: faces around a vertex must form one fan.
  const auto nv = mesh.vertices.size();
  std::vector<std::uint32_t> offsets(nv + 1, 0);
  for (const auto& f : mesh.faces) {
    for (auto v : f) ++offsets[v + 1];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::uint32_t> incident(offsets.back());
  {
    auto fill = offsets;
    for (std::uint32_t fi = 0; fi < mesh.faces.size(); ++fi) {
      for (auto v : mesh.faces[fi]) incident[fill[v]++] = fi;
    }
  }
  for (std::size_t v = 0; v < nv; ++v) {
    const auto begin = offsets[v], end = offsets[v + 1];
    if (end - begin <= 1) continue;
    UnionFind uf(end - begin);
    std::unordered_map<std::uint32_t, std::uint32_t> first_with;
    for (auto i = begin; i < end; ++i) {
      const auto& f = mesh.faces[incident[i]];
      for (auto u : f) {
        if (u == v) continue;
        auto [it, inserted] = first_with.emplace(u, i - begin);
        if (!inserted) uf.unite(it->second, i - begin);
      }
    }
    std::size_t roots = 0;
    for (std::uint32_t i = 0; i < end - begin; ++i) roots += uf.find(i) == i ? 1 : 0;
    if (roots > 1) ++r.non_manifold_vertex_count;
  }

  UnionFind comp(nv);
  std::vector<char> used(nv, 0);
  for (const auto& f : mesh.faces) {
    comp.unite(f[0], f[1]);
    comp.unite(f[1], f[2]);
    used[f[0]] = used[f[1]] = used[f[2]] = 1;
  }
  for (std::uint32_t v = 0; v < nv; ++v) {
    if (used[v] && comp.find(v) == v) ++r.connected_components;
  }

  r.is_closed = r.boundary_edge_count == 0;
  r.is_two_manifold = r.non_manifold_edge_count == 0 && r.non_manifold_vertex_count == 0;
  r.is_consistently_oriented = oriented && r.non_manifold_edge_count == 0;
  return r;
}

double signed_volume(const Mesh& mesh) {
  double v = 0.0;
  for (const auto& f : mesh.faces) {
    v += dot(mesh.vertices[f[0]], cross(mesh.vertices[f[1]], mesh.vertices[f[2]]));
  }
  return v / 6.0;
}

std::vector<Mesh> split_components(const Mesh& mesh) {
  UnionFind uf(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    uf.unite(f[0], f[1]);
    uf.unite(f[1], f[2]);
  }
  std::unordered_map<std::uint32_t, std::size_t> comp_of_root;
  std::vector<Mesh> out;
  std::vector<std::unordered_map<std::uint32_t, std::uint32_t>> remap;
  for (const auto& f : mesh.faces) {
    const auto root = uf.find(f[0]);
    auto [it, inserted] = comp_of_root.emplace(root, out.size());
    if (inserted) {
      out.emplace_back();
      remap.emplace_back();
    }
    auto& m = out[it->second];
    auto& rm = remap[it->second];
    Face nf{};
    for (int k = 0; k < 3; ++k) {
      auto [vit, vnew] = rm.emplace(f[k], static_cast<std::uint32_t>(m.vertices.size()));
      if (vnew) m.vertices.push_back(mesh.vertices[f[k]]);
      nf[k] = vit->second;
    }
    m.faces.push_back(nf);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Point clouds

PointCloud select_points(const PointCloud& pc, std::span<const std::uint32_t> indices) {
  PointCloud out;
  out.points.reserve(indices.size());
  for (auto i : indices) out.points.push_back(pc.points[i]);
  if (pc.has_normals()) {
    out.normals.reserve(indices.size());
    for (auto i : indices) out.normals.push_back(pc.normals[i]);
  }
  return out;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_pfpc(const PointCloud& pc) {
  if (pc.has_normals() && pc.normals.size() != pc.points.size()) {
    throw InvalidArgument("point cloud normals are not parallel to points");
  }
  std::vector<std::uint8_t> out;
  out.reserve(8 + pc.size() * 24);
  for (char c : {'P', 'F', 'P', 'C'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, static_cast<std::uint32_t>(pc.size()));
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3 p = pc.points[i];
    const Vec3 n = pc.has_normals() ? pc.normals[i] : Vec3{};
    for (double v : {p.x, p.y, p.z, n.x, n.y, n.z}) put_f32(out, v);
  }
  return out;
}

PointCloud decode_pfpc(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "PFPC", 4) != 0) throw IoFailure("not a PFPC stream");
  const auto count = get_u32(bytes, 4);
  if (bytes.size() != 8 + static_cast<std::size_t>(count) * 24) throw IoFailure("PFPC size mismatch");
  PointCloud pc;
  pc.points.resize(count);
  pc.normals.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    float f[6];
    for (int k = 0; k < 6; ++k) f[k] = std::bit_cast<float>(get_u32(bytes, 8 + i * 24 + k * 4));
    pc.points[i] = {f[0], f[1], f[2]};
    pc.normals[i] = {f[3], f[4], f[5]};
  }
  return pc;
}

void write_pfpc(const std::filesystem::path& path, const PointCloud& pc) {
  write_file_if_changed(path, encode_pfpc(pc));
}

PointCloud read_pfpc(const std::filesystem::path& path) { return decode_pfpc(read_file_bytes(path)); }

}  // namespace partforge
