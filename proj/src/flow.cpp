#include "partforge/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "partforge/errors.hpp"

namespace partforge {

LatentSet::LatentSet(int n, int k, int c) : parts(n), tokens(k), channels(c), data(Eigen::MatrixXd::Zero(n * k, c)) {}

LatentSet LatentSet::from_matrix(int n, int k, Eigen::MatrixXd m) {
  if (m.rows() != static_cast<Eigen::Index>(n) * k) throw ShapeMismatch("matrix rows do not equal N*K");
  LatentSet z;
  z.parts = n;
  z.tokens = k;
  z.channels = static_cast<int>(m.cols());
  z.data = std::move(m);
  return z;
}

LatentSet LatentSet::random_normal(int n, int k, int c, Rng& rng) {
  LatentSet z(n, k, c);
  for (Eigen::Index r = 0; r < z.data.rows(); ++r) {
    for (Eigen::Index col = 0; col < z.data.cols(); ++col) z.data(r, col) = rng.normal();
  }
  return z;
}

void validate(const LatentSet& z) {
  if (z.parts < 1 || z.tokens < 1 || z.channels < 1) throw InvalidArgument("latent set dimensions must be >= 1");
  if (z.data.rows() != static_cast<Eigen::Index>(z.parts) * z.tokens || z.data.cols() != z.channels) {
    throw ShapeMismatch("latent storage does not match its dimensions");
  }
  if (!z.data.allFinite()) throw InvalidArgument("latent set contains non-finite values");
}

namespace {

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out;
}

void require_same_shape(const LatentSet& a, const LatentSet& b, const char* op) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << op << ": shapes " << a.parts << "x" << a.tokens << "x" << a.channels << " and " << b.parts << "x"
        << b.tokens << "x" << b.channels << " differ";
    throw ShapeMismatch(msg.str());
  }
}

}  // namespace

std::string build_stage1_prompt(const std::string& caption, const PartSchema& schema) {
  const std::string body = "This object contains the following parts: " + join(schema.names()) + ".";
  const std::string c = trim(caption);
  return c.empty() ? body : c + ". " + body;
}

std::string build_stage2_prompt(const PartSchema& schema, const std::string& target) {
  const auto key = case_fold(trim(target));
  auto it = std::find_if(schema.names().begin(), schema.names().end(),
                         [&](const std::string& n) { return case_fold(n) == key; });
  if (it == schema.names().end()) throw TargetNotInSchema("target '" + target + "' is not in the part schema");
  return "This object has the following parts: " + join(schema.names()) + ". Target to segment: " + *it + ".";
}

double shift_timestep(double t, double shift) { return shift * t / (1.0 + (shift - 1.0) * t); }

double sample_timestep(Rng& rng, double shift, double mean, double stddev) {
  const double u = mean + stddev * rng.normal();
  const double base = 1.0 / (1.0 + std::exp(-u));
  const double t = shift_timestep(base, shift);
  return std::clamp(t, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
}

LatentSet interpolate(const LatentSet& z0, const LatentSet& z1, double t) {
  require_same_shape(z0, z1, "interpolate");
  LatentSet out = z0;
  out.data = t * z0.data + (1.0 - t) * z1.data;
  return out;
}

LatentSet velocity_target(const LatentSet& z0, const LatentSet& z1) {
  require_same_shape(z0, z1, "velocity_target");
  LatentSet out = z0;
  out.data = z1.data - z0.data;
  return out;
}

double fm_loss(const LatentSet& pred, const LatentSet& target) {
  require_same_shape(pred, target, "fm_loss");
  if (pred.size() == 0) throw InvalidArgument("fm_loss of an empty latent set");
  return (pred.data - target.data).squaredNorm() / static_cast<double>(pred.size());
}

LatentSet fm_loss_gradient(const LatentSet& pred, const LatentSet& target) {
  require_same_shape(pred, target, "fm_loss_gradient");
  LatentSet g = pred;
  g.data = 2.0 * (pred.data - target.data) / static_cast<double>(pred.size());
  return g;
}

CrossPartBlockParams init_cross_part_block(int channels, std::uint64_t seed, int heads) {
  if (channels < 1) throw InvalidArgument("channel count must be >= 1");
  if (heads < 1 || channels % heads != 0) throw InvalidArgument("head count must divide the channel count");
  CrossPartBlockParams p;
  p.channels = channels;
  p.heads = heads;
  p.seed = seed;
  Rng rng(seed);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(channels));
  auto gaussian = [&] {
    Eigen::MatrixXd m(channels, channels);
    for (int r = 0; r < channels; ++r) {
      for (int c = 0; c < channels; ++c) m(r, c) = stddev * rng.normal();
    }
    return m;
  };
  p.wq = gaussian();
  p.wk = gaussian();
  p.wv = gaussian();
  p.wo = Eigen::MatrixXd::Zero(channels, channels);
  p.ln_scale = Eigen::VectorXd::Ones(channels);
  p.ln_offset = Eigen::VectorXd::Zero(channels);
  return p;
}

namespace {

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const CrossPartBlockParams& p) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean) * inv * p.ln_scale(c) + p.ln_offset(c);
  }
  return out;
}

struct Forward {
  Eigen::MatrixXd ln_context;
  std::vector<Eigen::MatrixXd> probs;  // per head, M x (M + Kg)
  Eigen::MatrixXd attended;            // M x C, heads concatenated
  Eigen::MatrixXd out;
};

Forward forward_impl(const LatentSet& parts, const LatentSet& cond, const CrossPartBlockParams& p) {
  validate(parts);
  if (parts.channels != p.channels) throw ShapeMismatch("part channels differ from block channels");
  const bool has_cond = cond.data.rows() > 0;
  if (has_cond && cond.channels != p.channels) throw ShapeMismatch("condition channels differ from block channels");
  if (p.heads < 1 || p.channels % p.heads != 0) throw InvalidArgument("head count must divide the channel count");

  const Eigen::MatrixXd& x = parts.data;
  const Eigen::Index m = x.rows(), c = x.cols();
  Eigen::MatrixXd context(m + (has_cond ? cond.data.rows() : 0), c);
  context.topRows(m) = x;
  if (has_cond) context.bottomRows(cond.data.rows()) = cond.data;

  Forward f;
  const Eigen::MatrixXd ln_x = layer_norm(x, p);
  f.ln_context = layer_norm(context, p);
  const Eigen::MatrixXd q = ln_x * p.wq;
  const Eigen::MatrixXd k = f.ln_context * p.wk;
  const Eigen::MatrixXd v = f.ln_context * p.wv;
  const int d = p.channels / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  f.attended.resize(m, c);
  for (int h = 0; h < p.heads; ++h) {
    Eigen::MatrixXd s = q.middleCols(h * d, d) * k.middleCols(h * d, d).transpose() * scale;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const double mx = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - mx).exp().matrix();
      s.row(r) /= s.row(r).sum();
    }
    f.attended.middleCols(h * d, d) = s * v.middleCols(h * d, d);
    f.probs.push_back(std::move(s));
  }
  f.out = x + f.attended * p.wo;
  return f;
}

}  // namespace

LatentSet cross_part_block_forward(const LatentSet& parts, const LatentSet& cond, const CrossPartBlockParams& params) {
  auto f = forward_impl(parts, cond, params);
  return LatentSet::from_matrix(parts.parts, parts.tokens, std::move(f.out));
}

BlockGradients cross_part_block_gradients(const LatentSet& parts, const LatentSet& cond,
                                          const CrossPartBlockParams& params, const LatentSet& target) {
  const auto f = forward_impl(parts, cond, params);
  const auto out = LatentSet::from_matrix(parts.parts, parts.tokens, f.out);
  const Eigen::MatrixXd g = fm_loss_gradient(out, target).data;
  BlockGradients grads;
  grads.wo = f.attended.transpose() * g;
  const Eigen::MatrixXd d_attended = g * params.wo.transpose();
  const int d = params.channels / params.heads;
  grads.wv = Eigen::MatrixXd::Zero(params.channels, params.channels);
  for (int h = 0; h < params.heads; ++h) {
    const Eigen::MatrixXd d_v = f.probs[h].transpose() * d_attended.middleCols(h * d, d);
    grads.wv.middleCols(h * d, d) = f.ln_context.transpose() * d_v;
  }
  return grads;
}

double grad_check(const DifferentiableFn& f, const Eigen::VectorXd& point, double eps, double floor) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw InvalidArgument("grad_check eps must lie in [1e-7, 1e-3]");
  const Eigen::VectorXd analytic = f.gradient(point);
  if (analytic.size() != point.size()) throw ShapeMismatch("gradient size differs from point size");
  double worst = 0.0;
  Eigen::VectorXd probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + eps;
    const double plus = f.value(probe);
    probe(i) = point(i) - eps;
    const double minus = f.value(probe);
    probe(i) = point(i);
    const double numeric = (plus - minus) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
  }
  return worst;
}

namespace {

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
  }
  return v;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v(r * cols + c);
  }
  return m;
}

}  // namespace

DifferentiableFn fm_loss_fn(const LatentSet& target) {
  auto as_latent = [target](const Eigen::VectorXd& v) {
    return LatentSet::from_matrix(target.parts, target.tokens, unflatten(v, target.data.rows(), target.data.cols()));
  };
  return {[=](const Eigen::VectorXd& v) { return fm_loss(as_latent(v), target); },
          [=](const Eigen::VectorXd& v) { return flatten(fm_loss_gradient(as_latent(v), target).data); }};
}

DifferentiableFn block_loss_fn(const LatentSet& parts, const LatentSet& cond, const CrossPartBlockParams& params,
                               const LatentSet& target, BlockParam which) {
  auto with = [=](const Eigen::VectorXd& v) {
    CrossPartBlockParams p = params;
    (which == BlockParam::Value ? p.wv : p.wo) = unflatten(v, p.channels, p.channels);
    return p;
  };
  return {[=](const Eigen::VectorXd& v) { return fm_loss(cross_part_block_forward(parts, cond, with(v)), target); },
          [=](const Eigen::VectorXd& v) {
            const auto g = cross_part_block_gradients(parts, cond, with(v), target);
            return flatten(which == BlockParam::Value ? g.wv : g.wo);
          }};
}

// ---------------------------------------------------------------------------
// Invariant suite

namespace {

LatentSet permute_parts(const LatentSet& z, const std::vector<int>& perm) {
  LatentSet out = z;
  for (int i = 0; i < z.parts; ++i) out.data.middleRows(i * z.tokens, z.tokens) = z.data.middleRows(perm[i] * z.tokens, z.tokens);
  return out;
}

void randomize(CrossPartBlockParams& p, Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(p.channels));
  for (Eigen::Index i = 0; i < p.wo.size(); ++i) p.wo.data()[i] = stddev * rng.normal();
  for (Eigen::Index i = 0; i < p.ln_scale.size(); ++i) {
    p.ln_scale(i) = 1.0 + 0.1 * rng.normal();
    p.ln_offset(i) = 0.1 * rng.normal();
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

}  // namespace

std::vector<FlowCheckResult> run_flow_checks(std::uint64_t seed, std::size_t timestep_draws) {
  std::vector<FlowCheckResult> results;
  Rng rng(seed);

  {
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(5)), k = 1 + static_cast<int>(rng.below(4));
      const int c = 1 + static_cast<int>(rng.below(8));
      const auto parts = LatentSet::random_normal(n, k, c, rng);
      const auto cond = LatentSet::random_normal(1, 1 + static_cast<int>(rng.below(4)), c, rng);
      const auto params = init_cross_part_block(c, rng.next_u64());
      const auto out = cross_part_block_forward(parts, cond, params);
      ok = std::memcmp(out.data.data(), parts.data.data(), parts.size() * sizeof(double)) == 0;
    }
    results.push_back({"zero-init identity", ok, "100 random latent sets"});
  }
  {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(4)), k = 1 + static_cast<int>(rng.below(3)), c = 4;
      const auto parts = LatentSet::random_normal(n, k, c, rng);
      const auto cond = LatentSet::random_normal(1, 3, c, rng);
      auto params = init_cross_part_block(c, rng.next_u64(), 2);
      randomize(params, rng);
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      shuffle(perm, rng);
      const auto a = permute_parts(cross_part_block_forward(parts, cond, params), perm);
      const auto b = cross_part_block_forward(permute_parts(parts, perm), cond, params);
      worst = std::max(worst, (a.data - b.data).cwiseAbs().maxCoeff());
    }
    results.push_back({"part-permutation equivariance", worst <= 1e-12, "max abs diff " + fmt(worst)});
  }
  {
    bool ok = true;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto z0 = LatentSet::random_normal(2, 3, 4, rng), z1 = LatentSet::random_normal(2, 3, 4, rng);
      const auto v = velocity_target(z0, z1);
      ok = ok && fm_loss(v, v) == 0.0;
      worst = std::max(worst, (interpolate(z0, z1, 1e-9).data - z1.data).cwiseAbs().maxCoeff());
      worst = std::max(worst, (interpolate(z0, z1, 1.0 - 1e-9).data - z0.data).cwiseAbs().maxCoeff());
    }
    results.push_back({"fm_loss(target, target) = 0", ok, "20 random pairs"});
    results.push_back({"interpolation endpoints", worst <= 1e-8, "max abs diff " + fmt(worst)});
  }
  {
    const auto pred = LatentSet::random_normal(2, 3, 4, rng), target = LatentSet::random_normal(2, 3, 4, rng);
    const double e1 = grad_check(fm_loss_fn(target), flatten(pred.data), 1e-5);
    results.push_back({"fm_loss gradient", e1 < 1e-5, "max rel err " + fmt(e1)});
    const auto parts = LatentSet::random_normal(2, 2, 3, rng), cond = LatentSet::random_normal(1, 2, 3, rng);
    const auto tgt = LatentSet::random_normal(2, 2, 3, rng);
    auto params = init_cross_part_block(3, rng.next_u64());
    randomize(params, rng);
    const double e2 = grad_check(block_loss_fn(parts, cond, params, tgt, BlockParam::Value), flatten(params.wv), 1e-5);
    const double e3 = grad_check(block_loss_fn(parts, cond, params, tgt, BlockParam::Output), flatten(params.wo), 1e-5);
    results.push_back({"cross-part block gradient (value)", e2 < 1e-4, "max rel err " + fmt(e2)});
    results.push_back({"cross-part block gradient (output)", e3 < 1e-4, "max rel err " + fmt(e3)});
  }
  {
    std::vector<double> ts(timestep_draws);
    bool inside = true;
    for (auto& t : ts) {
      t = sample_timestep(rng);
      inside = inside && t > 0.0 && t < 1.0;
    }
    auto mid = ts.begin() + static_cast<std::ptrdiff_t>(ts.size() / 2);
    std::nth_element(ts.begin(), mid, ts.end());
    const double median = ts.empty() ? 0.0 : *mid;
    results.push_back({"timestep range (0,1)", inside, std::to_string(timestep_draws) + " draws"});
    results.push_back({"timestep median 0.8", std::abs(median - 0.8) <= 0.01, "median " + fmt(median)});
  }
  {
    const PartSchema schema({"body", "wheel"});
    const bool ok = build_stage1_prompt("a race car", schema) ==
                        "a race car. This object contains the following parts: body, wheel." &&
                    build_stage2_prompt(schema, "wheel") ==
                        "This object has the following parts: body, wheel. Target to segment: wheel.";
    results.push_back({"prompt templates", ok, "stage 1 and stage 2"});
  }
  return results;
}

}  // namespace partforge
