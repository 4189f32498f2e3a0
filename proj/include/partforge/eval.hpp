#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "partforge/asset.hpp"

namespace partforge {

inline constexpr double kDefaultTau = 0.1;
inline constexpr std::size_t kDefaultEvalPoints = 10000;
// Diameter of the [-1,1]^3 box; the score of a GT part nothing matched.
inline constexpr double kUnmatchedChamfer = 3.4641016151377544;

// Nearest-neighbour distance from every point of `from` to `to` (squared when
// asked). Throws EmptyCloud.
std::vector<double> directed_distances(const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                                       bool squared = false);

// 0.5 * (mean_a min_b |a-b| + mean_b min_a |b-a|). Throws EmptyCloud.
double chamfer(const PointCloud& a, const PointCloud& b, bool squared = false);

struct FScore {
  double precision = 0.0;  // fraction of b within tau of a
  double recall = 0.0;     // fraction of a within tau of b
  double f = 0.0;
};

FScore fscore_detail(const PointCloud& a, const PointCloud& b, double tau = kDefaultTau);
double fscore(const PointCloud& a, const PointCloud& b, double tau = kDefaultTau);

struct Matching {
  std::vector<std::pair<std::string, std::optional<std::size_t>>> pairs;  // GT order
  std::set<std::size_t> unmatched_pred_indices;
};

// GT parts in order each take the unused prediction with the lowest chamfer
// (lowest index on ties).
Matching greedy_match(const std::vector<std::pair<std::string, PointCloud>>& gt, const std::vector<PointCloud>& preds,
                      bool squared = false);

struct EvalOptions {
  bool ordered = false;
  std::size_t n_points = kDefaultEvalPoints;
  double tau = kDefaultTau;
  std::uint64_t seed = 0;
  bool squared_chamfer = false;
};

struct PartScore {
  std::string name;
  double cd = 0.0;
  double fscore = 0.0;
};

struct EvalReport {
  std::string asset_id;
  std::vector<PartScore> per_part;  // GT order
  double part_cd = 0.0;
  double part_fscore = 0.0;
  double holistic_cd = 0.0;
  double holistic_fscore = 0.0;
  Matching matching;
};

// Content-derived sampling seed: identical meshes yield identical clouds.
std::uint64_t mesh_content_hash(const Mesh& mesh);

// Both sides are normalized by the GT holistic transform, sampled per part
// and per concatenated shape, then scored.
EvalReport eval_object(const MultiPartAsset& gt, const MultiPartAsset& pred, const EvalOptions& options = {});

struct AggregateRow {
  std::size_t objects = 0;
  double part_cd = 0.0;
  double part_fscore = 0.0;
  double holistic_cd = 0.0;
  double holistic_fscore = 0.0;
};

AggregateRow aggregate(const std::vector<EvalReport>& reports);
std::string format_table(const std::vector<std::pair<std::string, AggregateRow>>& rows);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const AggregateRow& row);

}  // namespace partforge
