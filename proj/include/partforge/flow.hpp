#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <string>

#include "partforge/asset.hpp"
#include "partforge/rng.hpp"

namespace partforge {

// N parts x K tokens x C channels, stored as an (N*K) x C matrix with row
// index part * K + token.
struct LatentSet {
  int parts = 0;
  int tokens = 0;
  int channels = 0;
  Eigen::MatrixXd data;

  LatentSet() = default;
  LatentSet(int n, int k, int c);
  static LatentSet from_matrix(int n, int k, Eigen::MatrixXd m);
  static LatentSet random_normal(int n, int k, int c, Rng& rng);

  double& at(int part, int token, int channel) { return data(part * tokens + token, channel); }
  double at(int part, int token, int channel) const { return data(part * tokens + token, channel); }
  bool same_shape(const LatentSet& o) const {
    return parts == o.parts && tokens == o.tokens && channels == o.channels;
  }
  std::size_t size() const { return static_cast<std::size_t>(data.size()); }
};

// Throws InvalidArgument unless N, K, C >= 1 and every value is finite.
void validate(const LatentSet& z);

// Layers of the 21-layer backbone that receive a cross-part block (1-based).
inline constexpr std::array<int, 4> kCrossPartLayers{1, 5, 9, 17};
inline constexpr double kTimestepShift = 4.0;

std::string build_stage1_prompt(const std::string& caption, const PartSchema& schema);
// Throws TargetNotInSchema.
std::string build_stage2_prompt(const PartSchema& schema, const std::string& target);

// s * t / (1 + (s - 1) * t)
double shift_timestep(double t, double shift = kTimestepShift);
// sigmoid(Normal(mean, std)) followed by the shift map; always in (0, 1).
double sample_timestep(Rng& rng, double shift = kTimestepShift, double mean = 0.0, double stddev = 1.0);

// Z_t = t Z0 + (1 - t) Z1. Throws ShapeMismatch.
LatentSet interpolate(const LatentSet& z0, const LatentSet& z1, double t);
// v = Z1 - Z0. Throws ShapeMismatch.
LatentSet velocity_target(const LatentSet& z0, const LatentSet& z1);
// Mean squared difference. Throws ShapeMismatch.
double fm_loss(const LatentSet& pred, const LatentSet& target);
// d fm_loss / d pred = 2 (pred - target) / n.
LatentSet fm_loss_gradient(const LatentSet& pred, const LatentSet& target);

struct CrossPartBlockParams {
  int channels = 0;
  int heads = 1;
  Eigen::MatrixXd wq, wk, wv, wo;  // C x C, applied as x * W
  Eigen::VectorXd ln_scale, ln_offset;
  std::uint64_t seed = 0;
};

inline constexpr double kLayerNormEpsilon = 1e-5;

// Q/K/V ~ Normal(0, 1/C); output projection zero; scale 1, offset 0.
CrossPartBlockParams init_cross_part_block(int channels, std::uint64_t seed, int heads = 1);

// out = parts + Attn(LN(parts), LN([parts; cond])) * Wo, flattened over parts,
// without any part-index encoding. `cond` may hold zero tokens.
LatentSet cross_part_block_forward(const LatentSet& parts, const LatentSet& cond, const CrossPartBlockParams& params);

struct BlockGradients {
  Eigen::MatrixXd wv;
  Eigen::MatrixXd wo;
};

// Gradients of fm_loss(forward(parts, cond, params), target).
BlockGradients cross_part_block_gradients(const LatentSet& parts, const LatentSet& cond,
                                          const CrossPartBlockParams& params, const LatentSet& target);

struct DifferentiableFn {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

// Max over coordinates of |analytic - central difference| / max(|analytic|,
// |numeric|, floor). Throws InvalidArgument unless eps is in [1e-7, 1e-3].
double grad_check(const DifferentiableFn& f, const Eigen::VectorXd& point, double eps, double floor = 1e-6);

// Surrogates for grad_check: fm_loss w.r.t. the prediction, and the block
// loss w.r.t. the value or output projection (row-major flattening).
DifferentiableFn fm_loss_fn(const LatentSet& target);
enum class BlockParam { Value, Output };
DifferentiableFn block_loss_fn(const LatentSet& parts, const LatentSet& cond, const CrossPartBlockParams& params,
                               const LatentSet& target, BlockParam which);

struct FlowCheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// The invariant suite behind the flow-check subcommand.
std::vector<FlowCheckResult> run_flow_checks(std::uint64_t seed, std::size_t timestep_draws = 1'000'000);

}  // namespace partforge
