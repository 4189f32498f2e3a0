#include "partforge/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "partforge/errors.hpp"
#include "partforge/geometry.hpp"
#include "partforge/kdtree.hpp"
#include "partforge/rng.hpp"

namespace partforge {

namespace {

// A cloud with its search tree and bounds, built once and queried many times.
struct IndexedCloud {
  explicit IndexedCloud(const std::vector<Vec3>& p) : points(&p), tree(p) {
    if (p.empty()) throw EmptyCloud("distance query on an empty point cloud");
    for (const auto& v : p) box.expand(v);
  }
  const std::vector<Vec3>* points;
  KdTree tree;
  Aabb box;
};

// Queries run in the source tree's leaf order for locality; results are by index.
std::vector<double> squared_nn(const IndexedCloud& from, const KdTree& to) {
  const auto& pts = *from.points;
  const auto order = from.tree.leaf_order();
  std::vector<double> d(pts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(order.size()); ++i) {
    const auto k = order[i];
    d[k] = to.nearest(pts[k]).squared_distance;
  }
  return d;
}

// Squared nearest-neighbour distances in both directions.
struct PairDistances {
  std::vector<double> ab, ba;
};

PairDistances pair_distances(const IndexedCloud& a, const IndexedCloud& b) {
  return {squared_nn(a, b.tree), squared_nn(b, a.tree)};
}

double mean_distance(const std::vector<double>& sq, bool squared) {
  double s = 0.0;
  for (double x : sq) s += squared ? x : std::sqrt(x);
  return s / static_cast<double>(sq.size());
}

double fraction_below(const std::vector<double>& sq, double tau) {
  std::size_t n = 0;
  for (double x : sq) n += std::sqrt(x) < tau ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(sq.size());
}

double chamfer_of(const PairDistances& d, bool squared) {
  return 0.5 * (mean_distance(d.ab, squared) + mean_distance(d.ba, squared));
}

FScore fscore_of(const PairDistances& d, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  FScore s;
  s.recall = fraction_below(d.ab, tau);
  s.precision = fraction_below(d.ba, tau);
  s.f = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

// Lower bound on the chamfer distance from point-to-box distances.
double chamfer_lower_bound(const IndexedCloud& a, const IndexedCloud& b, bool squared) {
  auto directed = [squared](const std::vector<Vec3>& from, const Aabb& box) {
    double s = 0.0;
    for (const auto& p : from) {
      const double d2 = box.squared_distance_to(p);
      s += squared ? d2 : std::sqrt(d2);
    }
    return s / static_cast<double>(from.size());
  };
  return 0.5 * (directed(*a.points, b.box) + directed(*b.points, a.box));
}

// `chosen`, when given, receives the distances of each matched pair.
Matching greedy_match_indexed(const std::vector<std::string>& names, const std::vector<IndexedCloud>& gt,
                              const std::vector<IndexedCloud>& preds, bool squared,
                              std::vector<PairDistances>* chosen = nullptr) {
  if (gt.empty()) throw InvalidArgument("greedy_match needs at least one GT part");
  Matching m;
  std::vector<char> used(preds.size(), 0);
  for (std::size_t g = 0; g < gt.size(); ++g) {
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      if (!used[j]) candidates.emplace_back(chamfer_lower_bound(gt[g], preds[j], squared), j);
    }
    std::sort(candidates.begin(), candidates.end());
    std::optional<std::size_t> best;
    PairDistances best_d;
    double best_cd = std::numeric_limits<double>::infinity();
    for (const auto& [bound, j] : candidates) {
      if (bound > best_cd) break;
      if (bound == best_cd && best && j > *best) continue;
      auto d = pair_distances(gt[g], preds[j]);
      const double cd = chamfer_of(d, squared);
      if (cd < best_cd || (cd == best_cd && best && j < *best)) {
        best_cd = cd;
        best = j;
        best_d = std::move(d);
      }
    }
    if (best) used[*best] = 1;
    if (chosen) chosen->push_back(best ? std::move(best_d) : PairDistances{});
    m.pairs.emplace_back(names[g], best);
  }
  for (std::size_t j = 0; j < preds.size(); ++j) {
    if (!used[j]) m.unmatched_pred_indices.insert(j);
  }
  return m;
}

}  // namespace

std::vector<double> directed_distances(const std::vector<Vec3>& from, const std::vector<Vec3>& to, bool squared) {
  if (from.empty() || to.empty()) throw EmptyCloud("distance query on an empty point cloud");
  auto d = squared_nn(IndexedCloud(from), KdTree(to));
  if (!squared) {
    for (auto& x : d) x = std::sqrt(x);
  }
  return d;
}

double chamfer(const PointCloud& a, const PointCloud& b, bool squared) {
  return chamfer_of(pair_distances(IndexedCloud(a.points), IndexedCloud(b.points)), squared);
}

FScore fscore_detail(const PointCloud& a, const PointCloud& b, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  return fscore_of(pair_distances(IndexedCloud(a.points), IndexedCloud(b.points)), tau);
}

double fscore(const PointCloud& a, const PointCloud& b, double tau) { return fscore_detail(a, b, tau).f; }

Matching greedy_match(const std::vector<std::pair<std::string, PointCloud>>& gt, const std::vector<PointCloud>& preds,
                      bool squared) {
  if (gt.empty()) throw InvalidArgument("greedy_match needs at least one GT part");
  std::vector<std::string> names;
  std::vector<IndexedCloud> gi, pi;
  for (const auto& [name, cloud] : gt) {
    names.push_back(name);
    gi.emplace_back(cloud.points);
  }
  for (const auto& p : preds) pi.emplace_back(p.points);
  return greedy_match_indexed(names, gi, pi, squared);
}

std::uint64_t mesh_content_hash(const Mesh& mesh) {
  std::uint64_t h = fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(mesh.vertices.data()),
                                                          mesh.vertices.size() * sizeof(Vec3)));
  return fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(mesh.faces.data()),
                                               mesh.faces.size() * sizeof(Face)),
                 h);
}

namespace {

PointCloud sample_for_eval(const Mesh& mesh, const EvalOptions& o) {
  return sample_surface(mesh, o.n_points, mix_seed(o.seed, mesh_content_hash(mesh)), false);
}

// Concatenation in content-hash order, so part order does not matter.
Mesh canonical_concat(const std::vector<Mesh>& parts) {
  std::vector<std::pair<std::uint64_t, const Mesh*>> keyed;
  for (const auto& p : parts) keyed.emplace_back(mesh_content_hash(p), &p);
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<const Mesh*> ordered;
  for (const auto& [h, m] : keyed) ordered.push_back(m);
  return concat_meshes(ordered);
}

}  // namespace

EvalReport eval_object(const MultiPartAsset& gt, const MultiPartAsset& pred, const EvalOptions& options) {
  if (gt.parts.empty()) throw InvalidArgument("GT asset has no parts");
  if (options.n_points == 0) throw InvalidArgument("n_points must be positive");
  const auto transform = unit_box_transform(gt);
  std::vector<Mesh> gt_meshes, pred_meshes;
  for (const auto& p : gt.parts) gt_meshes.push_back(transform.apply(p.mesh));
  for (const auto& p : pred.parts) pred_meshes.push_back(transform.apply(p.mesh));

  std::vector<std::pair<std::string, PointCloud>> gt_clouds;
  for (std::size_t i = 0; i < gt_meshes.size(); ++i) {
    gt_clouds.emplace_back(gt.parts[i].name, sample_for_eval(gt_meshes[i], options));
  }
  std::vector<PointCloud> pred_clouds;
  for (const auto& m : pred_meshes) pred_clouds.push_back(sample_for_eval(m, options));

  if (!(options.tau > 0.0)) throw InvalidArgument("tau must be positive");
  std::vector<std::string> names;
  std::vector<IndexedCloud> gi, pi;
  for (const auto& [name, cloud] : gt_clouds) {
    names.push_back(name);
    gi.emplace_back(cloud.points);
  }
  for (const auto& c : pred_clouds) pi.emplace_back(c.points);

  EvalReport r;
  r.asset_id = gt.asset_id;
  std::vector<PairDistances> matched;
  if (options.ordered) {
    for (std::size_t i = 0; i < gt_clouds.size(); ++i) {
      r.matching.pairs.emplace_back(gt_clouds[i].first,
                                    i < pred_clouds.size() ? std::optional<std::size_t>(i) : std::nullopt);
    }
    for (std::size_t j = gt_clouds.size(); j < pred_clouds.size(); ++j) r.matching.unmatched_pred_indices.insert(j);
  } else {
    r.matching = greedy_match_indexed(names, gi, pi, options.squared_chamfer, &matched);
  }

  const double penalty = options.squared_chamfer ? kUnmatchedChamfer * kUnmatchedChamfer : kUnmatchedChamfer;
  for (std::size_t i = 0; i < gt_clouds.size(); ++i) {
    PartScore s{gt_clouds[i].first, penalty, 0.0};
    if (const auto& j = r.matching.pairs[i].second) {
      const auto d = matched.empty() ? pair_distances(gi[i], pi[*j]) : std::move(matched[i]);
      s.cd = chamfer_of(d, options.squared_chamfer);
      s.fscore = fscore_of(d, options.tau).f;
    }
    r.part_cd += s.cd;
    r.part_fscore += s.fscore;
    r.per_part.push_back(std::move(s));
  }
  r.part_cd /= static_cast<double>(gt_clouds.size());
  r.part_fscore /= static_cast<double>(gt_clouds.size());

  if (pred_meshes.empty()) {
    r.holistic_cd = penalty;
    r.holistic_fscore = 0.0;
  } else {
    const auto gt_full = sample_for_eval(canonical_concat(gt_meshes), options);
    const auto pred_full = sample_for_eval(canonical_concat(pred_meshes), options);
    const auto d = pair_distances(IndexedCloud(gt_full.points), IndexedCloud(pred_full.points));
    r.holistic_cd = chamfer_of(d, options.squared_chamfer);
    r.holistic_fscore = fscore_of(d, options.tau).f;
  }
  return r;
}

AggregateRow aggregate(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InvalidArgument("aggregate needs at least one report");
  AggregateRow row;
  row.objects = reports.size();
  for (const auto& r : reports) {
    row.part_cd += r.part_cd;
    row.part_fscore += r.part_fscore;
    row.holistic_cd += r.holistic_cd;
    row.holistic_fscore += r.holistic_fscore;
  }
  const double n = static_cast<double>(reports.size());
  row.part_cd /= n;
  row.part_fscore /= n;
  row.holistic_cd /= n;
  row.holistic_fscore /= n;
  return row;
}

std::string format_table(const std::vector<std::pair<std::string, AggregateRow>>& rows) {
  std::size_t w = 6;
  for (const auto& [name, row] : rows) w = std::max(w, name.size());
  auto pad = [](std::string s, std::size_t width) {
    s.resize(std::max(s.size(), width), ' ');
    return s;
  };
  // Column headers hold multi-byte arrows; pad by display width.
  std::string out = pad("Method", w) + " | " + "Part-Level           | Holistic-Level\n";
  out += pad("", w) + " | CD↓      F-score↑    | CD↓      F-score↑\n";
  out += std::string(w, '-') + "-+----------------------+---------------------\n";
  for (const auto& [name, row] : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), " | %-8.4f %-11.4f | %-8.4f %.4f\n", row.part_cd, row.part_fscore,
                  row.holistic_cd, row.holistic_fscore);
    out += pad(name, w) + buf;
  }
  return out;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& p : r.per_part) parts.push_back({{"name", p.name}, {"cd", p.cd}, {"fscore", p.fscore}});
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [name, idx] : r.matching.pairs) {
    pairs.push_back({{"gt", name}, {"pred", idx ? nlohmann::json(*idx) : nlohmann::json(nullptr)}});
  }
  return {{"asset_id", r.asset_id},
          {"per_part", std::move(parts)},
          {"Part-Level", {{"CD↓", r.part_cd}, {"F-score↑", r.part_fscore}}},
          {"Holistic-Level", {{"CD↓", r.holistic_cd}, {"F-score↑", r.holistic_fscore}}},
          {"matching", {{"pairs", std::move(pairs)}, {"unmatched_pred_indices", r.matching.unmatched_pred_indices}}}};
}

nlohmann::json to_json(const AggregateRow& row) {
  return {{"objects", row.objects},
          {"Part-Level", {{"CD↓", row.part_cd}, {"F-score↑", row.part_fscore}}},
          {"Holistic-Level", {{"CD↓", row.holistic_cd}, {"F-score↑", row.holistic_fscore}}}};
}

}  // namespace partforge
