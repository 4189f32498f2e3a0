#include <omp.h>

#include <algorithm>
#include <numbers>

#include "partforge/bvh.hpp"
#include "partforge/errors.hpp"
#include "partforge/geometry.hpp"
#include "partforge/rng.hpp"

namespace partforge {

std::vector<Vec3> hemisphere_directions(int count) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return dirs;
}

namespace {

// Orthonormal basis with `n` as the third axis (Duff et al. 2017).
void basis(Vec3 n, Vec3& t, Vec3& b) {
  const double sign = std::copysign(1.0, n.z);
  const double a = -1.0 / (sign + n.z);
  const double c = n.x * n.y * a;
  t = {1.0 + sign * n.x * n.x * a, sign * c, -sign * n.x};
  b = {c, sign + n.y * n.y * a, -n.y};
}

struct Candidate {
  Vec3 point;
  Vec3 normal;
};

class SurfaceSampler {
 public:
  SurfaceSampler(const Mesh& mesh, std::uint64_t seed) : mesh_(mesh), rng_(seed) {
    if (!detect_degenerate(mesh).none()) throw DegenerateInput("sample_surface needs a non-degenerate mesh");
    cumulative_.reserve(mesh.faces.size());
    normals_.reserve(mesh.faces.size());
    double total = 0.0;
    for (const auto& f : mesh.faces) {
      const Vec3 a = mesh.vertices[f[0]], b = mesh.vertices[f[1]], c = mesh.vertices[f[2]];
      const Vec3 nrm = cross(b - a, c - a);
      total += 0.5 * norm(nrm);
      cumulative_.push_back(total);
      normals_.push_back(normalized(nrm));
    }
  }

  Candidate draw() {
    const double total = cumulative_.back();
    const double target = rng_.uniform() * total;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    auto fi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                                 static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
    // Skip zero-area faces a boundary draw may land on.
    while (fi > 0 && cumulative_[fi] == cumulative_[fi - 1]) --fi;
    const auto& f = mesh_.faces[fi];
    const double s = std::sqrt(rng_.uniform());
    const double u2 = rng_.uniform();
    const double wa = 1.0 - s, wb = s * (1.0 - u2), wc = s * u2;
    const Vec3 p = mesh_.vertices[f[0]] * wa + mesh_.vertices[f[1]] * wb + mesh_.vertices[f[2]] * wc;
    return {p, normals_[fi]};
  }

 private:
  const Mesh& mesh_;
  Rng rng_;
  std::vector<double> cumulative_;
  std::vector<Vec3> normals_;
};

bool visible(const TriangleBvh& bvh, const std::vector<Vec3>& dirs, const Candidate& c, double offset) {
  Vec3 t, b;
  basis(c.normal, t, b);
  const Vec3 origin = c.point + c.normal * offset;
  for (const auto& d : dirs) {
    const Vec3 dir = t * d.x + b * d.y + c.normal * d.z;
    if (!bvh.occluded(origin, dir, 0.0, INFINITY)) return true;
  }
  return false;
}

template <bool Parallel>
PointCloud sample_impl(const Mesh& mesh, std::size_t n, std::uint64_t seed, bool visibility_filter) {
  SurfaceSampler sampler(mesh, seed);
  PointCloud pc;
  pc.points.reserve(n);
  pc.normals.reserve(n);
  if (!visibility_filter) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = sampler.draw();
      pc.points.push_back(c.point);
      pc.normals.push_back(c.normal);
    }
    return pc;
  }

  const TriangleBvh bvh(mesh);
  const auto dirs = hemisphere_directions(kVisibilityDirections);
  const Aabb box = mesh.bounds();
  const double offset = 1e-7 * std::max(norm(box.extent()), 1e-12);
  const std::size_t budget = kVisibilityAttemptFactor * n;
  std::size_t attempts = 0;
  std::vector<Candidate> batch;
  std::vector<char> ok;
  while (pc.size() < n) {
    if (attempts >= budget) {
      throw VisibilityExhausted("found " + std::to_string(pc.size()) + " of " + std::to_string(n) +
                                " visible points in " + std::to_string(budget) + " attempts");
    }
    // Batch composition depends only on the remaining counts, never on the
    // thread count, so results are identical to the serial path.
    const std::size_t want = std::max<std::size_t>(n - pc.size(), 256);
    const std::size_t m = std::min(want, budget - attempts);
    batch.resize(m);
    ok.assign(m, 0);
    for (auto& c : batch) c = sampler.draw();
    attempts += m;
    if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 64)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
        ok[i] = visible(bvh, dirs, batch[i], offset) ? 1 : 0;
      }
    } else {
      for (std::size_t i = 0; i < m; ++i) ok[i] = visible(bvh, dirs, batch[i], offset) ? 1 : 0;
    }
    for (std::size_t i = 0; i < m && pc.size() < n; ++i) {
      if (!ok[i]) continue;
      pc.points.push_back(batch[i].point);
      pc.normals.push_back(batch[i].normal);
    }
  }
  return pc;
}

}  // namespace

PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed, bool visibility_filter) {
  return sample_impl<true>(mesh, n, seed, visibility_filter);
}

namespace reference {
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed, bool visibility_filter) {
  return sample_impl<false>(mesh, n, seed, visibility_filter);
}
}  // namespace reference

}  // namespace partforge
