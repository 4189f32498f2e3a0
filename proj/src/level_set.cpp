#include <array>
#include <cstdint>
#include <deque>
#include <unordered_map>

#include "partforge/errors.hpp"
#include "partforge/geometry.hpp"

namespace partforge {

namespace {

// The sampled grid is surrounded by one virtual layer of "outside" points so
// that the extracted surface is closed even when the inside set touches the
// grid boundary. Padded coordinates run 0..P-1 with P = R + 2.
class PaddedField {
 public:
  PaddedField(const ScalarGrid& grid, double iso)
      : grid_(grid), iso_(iso), r_(grid.spec.resolution), p_(r_ + 2), inside_(cube(p_), 0) {
    for (int k = 0; k < r_; ++k) {
      for (int j = 0; j < r_; ++j) {
        for (int i = 0; i < r_; ++i) {
          inside_[index(i + 1, j + 1, k + 1)] = grid.at(i, j, k) < iso ? 1 : 0;
        }
      }
    }
  }

  static std::size_t cube(int n) { return static_cast<std::size_t>(n) * n * n; }
  int size() const { return p_; }
  std::size_t index(int i, int j, int k) const { return (static_cast<std::size_t>(k) * p_ + j) * p_ + i; }
  bool is_real(int i, int j, int k) const {
    return i >= 1 && j >= 1 && k >= 1 && i <= r_ && j <= r_ && k <= r_;
  }
  bool inside(int i, int j, int k) const { return inside_[index(i, j, k)] != 0; }

  double value(int i, int j, int k) const {
    if (!is_real(i, j, k)) return iso_ + grid_.spec.spacing;
    if (auto it = overrides_.find(index(i, j, k)); it != overrides_.end()) return it->second;
    return grid_.at(i - 1, j - 1, k - 1);
  }

  Vec3 position(int i, int j, int k) const { return grid_.spec.point(i - 1, j - 1, k - 1); }

  // Moves an outside sample just below the iso level.
  void flip_inside(int i, int j, int k) {
    const auto idx = index(i, j, k);
    inside_[idx] = 1;
    overrides_[idx] = iso_ - 1e-3 * grid_.spec.spacing;
  }

 private:
  const ScalarGrid& grid_;
  double iso_;
  int r_;
  int p_;
  std::vector<std::uint8_t> inside_;
  std::unordered_map<std::size_t, double> overrides_;
};

struct Corner {
  int i, j, k;
};

Corner corner_of(int ci, int cj, int ck, int c) { return {ci + (c & 1), cj + ((c >> 1) & 1), ck + ((c >> 2) & 1)}; }

// Faces of the unit cube as corner bitmasks in cyclic order.
constexpr std::array<std::array<int, 4>, 6> kCubeFaces{{
    {0, 2, 6, 4},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 3, 7, 6},  // y = 1
    {0, 1, 3, 2},  // z = 0
    {4, 5, 7, 6},  // z = 1
}};

// Returns the corner (bitmask) to flip inside if the cell holds a critical
// configuration (checkerboard face or body-diagonal-only contact), or -1.
int critical_corner(const PaddedField& f, int ci, int cj, int ck) {
  std::array<bool, 8> in{};
  std::array<double, 8> val{};
  std::array<bool, 8> real{};
  for (int c = 0; c < 8; ++c) {
    const auto p = corner_of(ci, cj, ck, c);
    in[c] = f.inside(p.i, p.j, p.k);
    val[c] = f.value(p.i, p.j, p.k);
    real[c] = f.is_real(p.i, p.j, p.k);
  }
  auto pick = [&](std::initializer_list<int> candidates) {
    int best = -1;
    for (int c : candidates) {
      if (in[c] || !real[c]) continue;
      if (best < 0 || val[c] < val[best]) best = c;
    }
    return best;
  };
  for (const auto& face : kCubeFaces) {
    const int a = face[0], b = face[1], c = face[2], d = face[3];
    if (in[a] == in[c] && in[b] == in[d] && in[a] != in[b]) {
      const int chosen = in[a] ? pick({b, d}) : pick({a, c});
      if (chosen >= 0) return chosen;
    }
  }
  for (int c = 0; c < 4; ++c) {
    const int o = c ^ 7;
    if (in[c] != in[o]) continue;
    bool others_opposite = true;
    for (int q = 0; q < 8 && others_opposite; ++q) {
      if (q != c && q != o && in[q] == in[c]) others_opposite = false;
    }
    if (!others_opposite) continue;
    int chosen = -1;
    if (in[c]) {
      chosen = pick({0, 1, 2, 3, 4, 5, 6, 7});
    } else {
      chosen = pick({c, o});
    }
    if (chosen >= 0) return chosen;
  }
  return -1;
}

void make_well_composed(PaddedField& f) {
  const int n = f.size() - 1;  // cells per axis
  std::deque<std::array<int, 3>> queue;
  auto process = [&](int ci, int cj, int ck) {
    while (true) {
      const int c = critical_corner(f, ci, cj, ck);
      if (c < 0) return;
      const auto p = corner_of(ci, cj, ck, c);
      f.flip_inside(p.i, p.j, p.k);
      for (int dz = -1; dz <= 0; ++dz) {
        for (int dy = -1; dy <= 0; ++dy) {
          for (int dx = -1; dx <= 0; ++dx) {
            const int qi = p.i + dx, qj = p.j + dy, qk = p.k + dz;
            if (qi < 0 || qj < 0 || qk < 0 || qi >= n || qj >= n || qk >= n) continue;
            if (qi == ci && qj == cj && qk == ck) continue;
            queue.push_back({qi, qj, qk});
          }
        }
      }
    }
  };
  for (int ck = 0; ck < n; ++ck) {
    for (int cj = 0; cj < n; ++cj) {
      for (int ci = 0; ci < n; ++ci) process(ci, cj, ck);
    }
  }
  while (!queue.empty()) {
    const auto [ci, cj, ck] = queue.front();
    queue.pop_front();
    process(ci, cj, ck);
  }
}

}  // namespace

Mesh extract_level_set(const ScalarGrid& grid, double iso) {
  if (!(iso > 0.0)) throw InvalidArgument("iso level must be positive for an unsigned field");
  const int r = grid.spec.resolution;
  if (r < 2 || grid.values.size() != grid.spec.point_count()) throw InvalidArgument("malformed grid");
  std::size_t inside_count = 0;
  for (double v : grid.values) {
    if (!std::isfinite(v)) throw InvalidArgument("grid values must be finite");
    inside_count += v < iso ? 1 : 0;
  }
  if (inside_count == 0 || inside_count == grid.values.size()) {
    throw NoSurface("iso level " + std::to_string(iso) + " is not crossed in the grid");
  }

  PaddedField field(grid, iso);
  make_well_composed(field);

  const int p = field.size();
  const int ncell = p - 1;
  auto cell_key = [&](int ci, int cj, int ck) {
    return (static_cast<std::uint64_t>(ck) * ncell + cj) * ncell + ci;
  };

  Mesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> cell_vertex;

  auto crossing = [&](int ai, int aj, int ak, int bi, int bj, int bk) {
    const double va = field.value(ai, aj, ak), vb = field.value(bi, bj, bk);
    const double t = (iso - va) / (vb - va);
    const Vec3 pa = field.position(ai, aj, ak), pb = field.position(bi, bj, bk);
    return pa + (pb - pa) * t;
  };

  auto vertex_for = [&](int ci, int cj, int ck) -> std::uint32_t {
    const auto key = cell_key(ci, cj, ck);
    if (auto it = cell_vertex.find(key); it != cell_vertex.end()) return it->second;
    Vec3 sum;
    int count = 0;
    for (int c = 0; c < 8; ++c) {
      for (int axis = 0; axis < 3; ++axis) {
        if (c & (1 << axis)) continue;
        const int d = c | (1 << axis);
        const auto a = corner_of(ci, cj, ck, c), b = corner_of(ci, cj, ck, d);
        if (field.inside(a.i, a.j, a.k) != field.inside(b.i, b.j, b.k)) {
          sum += crossing(a.i, a.j, a.k, b.i, b.j, b.k);
          ++count;
        }
      }
    }
    const auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(sum / static_cast<double>(count));
    cell_vertex.emplace(key, idx);
    return idx;
  };

  auto emit_quad = [&](std::array<std::uint32_t, 4> q) {
    const Vec3 v0 = mesh.vertices[q[0]], v1 = mesh.vertices[q[1]], v2 = mesh.vertices[q[2]],
               v3 = mesh.vertices[q[3]];
    if (squared_distance(v0, v2) <= squared_distance(v1, v3)) {
      mesh.faces.push_back({q[0], q[1], q[2]});
      mesh.faces.push_back({q[0], q[2], q[3]});
    } else {
      mesh.faces.push_back({q[0], q[1], q[3]});
      mesh.faces.push_back({q[1], q[2], q[3]});
    }
  };

  for (int k = 0; k < p; ++k) {
    for (int j = 0; j < p; ++j) {
      for (int i = 0; i < p; ++i) {
        const bool in0 = field.inside(i, j, k);
        for (int axis = 0; axis < 3; ++axis) {
          int e[3] = {i, j, k};
          e[axis] += 1;
          if (e[axis] >= p) continue;
          const bool in1 = field.inside(e[0], e[1], e[2]);
          if (in0 == in1) continue;
          // The edge's other two axes, cyclic after `axis`.
          const int b = (axis + 1) % 3, c = (axis + 2) % 3;
          int base[3] = {i, j, k};
          auto cell = [&](int db, int dc) {
            int q[3] = {base[0], base[1], base[2]};
            q[b] += db;
            q[c] += dc;
            return vertex_for(q[0], q[1], q[2]);
          };
          std::array<std::uint32_t, 4> quad{cell(-1, -1), cell(0, -1), cell(0, 0), cell(-1, 0)};
          if (!in0) std::swap(quad[1], quad[3]);
          emit_quad(quad);
        }
      }
    }
  }
  return mesh;
}

}  // namespace partforge
