#include "nextmp/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nextmp {

GuidanceHyper default_hyper(RobotKind robot) {
  GuidanceHyper h;
  h.robot = robot;
  h.q = make_robot(robot).dof();
  return h;
}

std::vector<TensorSpec> param_layout(const GuidanceHyper& h) {
  std::vector<TensorSpec> layout;
  auto weight = [&](std::string name, std::vector<int> shape, int fi, int fo) {
    layout.push_back({std::move(name), std::move(shape), fi, fo, true});
  };
  auto bias = [&](std::string name, int n) {
    layout.push_back({std::move(name), {n}, 0, 0, false});
  };

  for (int i = 0; i < h.k_w; ++i) {
    const int cin = i == 0 ? 4 : h.spatial_channels;
    const int cout = i == h.k_w - 1 ? 1 : h.spatial_channels;
    weight("spatial_kernel_" + std::to_string(i), {1, 1, cin, cout}, cin,
           cout);
    bias("spatial_bias_" + std::to_string(i), cout);
  }
  for (int i = 0; i < h.k_h; ++i) {
    const int in = i == 0 ? h.q - 2 : h.d_e;
    const int out = i == h.k_h - 1 ? h.d_a : h.d_e;
    weight("config_weight_" + std::to_string(i), {out, in}, in, out);
    bias("config_bias_" + std::to_string(i), out);
  }
  const int mc = h.map_channels();
  weight("w0_kernel", {3, 3, 3, 1 + mc, 2}, 27 * (1 + mc), 27 * 2);
  bias("w0_bias", 2);
  if (h.cell == PlanCell::MinPool) {
    weight("w1_kernel", {3, 3, 3, h.p + 1, h.p * h.k_a}, 27 * (h.p + 1),
           27 * h.p * h.k_a);
    bias("w1_bias", h.p * h.k_a);
  } else {
    weight("w1_kernel", {3, 3, 3, h.d_e + 1, h.d_e}, 27 * (h.d_e + 1),
           27 * h.d_e);
    bias("w1_bias", h.d_e);
    weight("lstm_wx", {h.d_e, 4 * h.d_e}, h.d_e, 4 * h.d_e);
    weight("lstm_wh", {h.d_e, 4 * h.d_e}, h.d_e, 4 * h.d_e);
    bias("lstm_bias", 4 * h.d_e);
    weight("lstm_proj", {h.d_e, h.p}, h.d_e, h.p);
    bias("lstm_proj_bias", h.p);
  }
  weight("w2_weight", {1, h.p}, h.p, 1);
  bias("w2_bias", 1);
  weight("w3_weight", {h.q, h.p}, h.p, h.q);
  bias("w3_bias", h.q);
  return layout;
}

GuidanceParams GuidanceParams::init(const GuidanceHyper& hyper, Rng& rng) {
  GuidanceParams p;
  p.hyper = hyper;
  for (const auto& spec : param_layout(hyper)) {
    p.tensors.push_back(spec.is_weight
                            ? Tensor::glorot_uniform(spec.shape, spec.fan_in,
                                                     spec.fan_out, rng)
                            : Tensor::zeros(spec.shape));
  }
  return p;
}

GuidanceParams GuidanceParams::zeros(const GuidanceHyper& hyper) {
  GuidanceParams p;
  p.hyper = hyper;
  for (const auto& spec : param_layout(hyper))
    p.tensors.push_back(Tensor::zeros(spec.shape));
  return p;
}

namespace {

// Tensor indices within the fixed layout.
struct ParamIndex {
  int spatial0 = 0;  // kernel/bias pairs
  int config0 = 0;
  int w0 = 0;
  int cell0 = 0;
  int w2 = 0;
  int w3 = 0;

  explicit ParamIndex(const GuidanceHyper& h) {
    spatial0 = 0;
    config0 = 2 * h.k_w;
    w0 = config0 + 2 * h.k_h;
    cell0 = w0 + 2;
    const int cell_tensors = h.cell == PlanCell::MinPool ? 2 : 7;
    w2 = cell0 + cell_tensors;
    w3 = w2 + 2;
  }
};

// Binds parameter tensors as tape leaves on first use, so single-state
// queries only copy the tensors they touch.
struct ParamBinder {
  Tape& tape;
  const GuidanceParams& params;
  std::vector<Tape::NodeId> ids;

  ParamBinder(Tape& t, const GuidanceParams& p)
      : tape(t), params(p), ids(p.tensors.size(), -1) {}

  Tape::NodeId operator()(int idx) {
    if (ids[idx] < 0) ids[idx] = tape.leaf(params.tensors[idx]);
    return ids[idx];
  }
};

Tensor state_input_planes(const GuidanceHyper& h, const Config& s) {
  Tensor f0 = Tensor::zeros({h.d, h.d, 4});
  const double inv = 1.0 / static_cast<double>(h.d);
  std::size_t i = 0;
  for (int r = 0; r < h.d; ++r) {
    const double cy = (r + 0.5) * inv;
    for (int c = 0; c < h.d; ++c) {
      const double cx = (c + 0.5) * inv;
      f0.data[i++] = s[0];
      f0.data[i++] = s[1];
      f0.data[i++] = cx;
      f0.data[i++] = cy;
    }
  }
  return f0;
}

// The attention split always uses the planar position for the spatial
// branch; any further workspace coordinate (the z of a 3d base) joins the
// joint coordinates in the configuration branch.
Tensor config_tail(const GuidanceHyper& h, const Config& s) {
  Tensor t = Tensor::zeros({h.q - 2});
  for (int i = 2; i < h.q; ++i) t.data[i - 2] = s[i];
  return t;
}

Tape::NodeId wire_embed(Tape& tape, const GuidanceHyper& h, ParamBinder& pb,
                        const Config& s) {
  const ParamIndex ix(h);
  Tape::NodeId x = tape.leaf(state_input_planes(h, s));
  for (int i = 0; i < h.k_w; ++i)
    x = tape.relu(
        tape.conv2d(x, pb(ix.spatial0 + 2 * i), pb(ix.spatial0 + 2 * i + 1)));
  const Tape::NodeId mu_w = tape.softmax_all(x);  // [d, d, 1]

  Tape::NodeId hcfg = tape.leaf(config_tail(h, s));
  for (int i = 0; i < h.k_h; ++i)
    hcfg = tape.relu(
        tape.dense(hcfg, pb(ix.config0 + 2 * i), pb(ix.config0 + 2 * i + 1)));
  const Tape::NodeId mu_h = tape.softmax_all(hcfg);  // [d_a]

  return tape.mul(tape.broadcast_lastdim(mu_w, h.d_a),
                  tape.tile_leading(mu_h, {h.d, h.d}));
}

struct LatentNodes {
  Tape::NodeId nu;
  Tape::NodeId r_tilde;
};

LatentNodes wire_latent(Tape& tape, const GuidanceHyper& h, ParamBinder& pb,
                        Tape::NodeId mu_goal, const Tensor& map_channels) {
  const ParamIndex ix(h);
  const int mc = h.map_channels();

  // Stack the goal attention with the map channels broadcast along d_a.
  Tensor map4 = Tensor::zeros({h.d, h.d, h.d_a, mc});
  for (int r = 0; r < h.d; ++r)
    for (int c = 0; c < h.d; ++c)
      for (int l = 0; l < h.d_a; ++l)
        for (int m = 0; m < mc; ++m)
          map4.data[((static_cast<std::size_t>(r) * h.d + c) * h.d_a + l) *
                        mc +
                    m] =
              map_channels
                  .data[(static_cast<std::size_t>(r) * h.d + c) * mc + m];

  const Tape::NodeId mu4 = tape.reshape(mu_goal, {h.d, h.d, h.d_a, 1});
  const Tape::NodeId x = tape.concat_lastdim(mu4, tape.leaf(std::move(map4)));
  const Tape::NodeId y = tape.sigmoid(tape.conv3d(x, pb(ix.w0), pb(ix.w0 + 1)));
  const Tape::NodeId seed = tape.slice_lastdim(y, 0, 1);
  const Tape::NodeId r_tilde = tape.slice_lastdim(y, 1, 2);

  Tape::NodeId nu = tape.broadcast_lastdim(seed, h.p);
  if (h.cell == PlanCell::MinPool) {
    for (int t = 0; t < h.t_vi; ++t) {
      const Tape::NodeId z = tape.conv3d(tape.concat_lastdim(nu, r_tilde),
                                         pb(ix.cell0), pb(ix.cell0 + 1));
      nu = tape.group_min_lastdim(z, h.k_a);
    }
  } else {
    Tape::NodeId hid = tape.leaf(Tensor::zeros({h.d, h.d, h.d_a, h.d_e}));
    Tape::NodeId cell = tape.leaf(Tensor::zeros({h.d, h.d, h.d_a, h.d_e}));
    for (int t = 0; t < h.t_vi; ++t) {
      const Tape::NodeId xt = tape.conv3d(tape.concat_lastdim(hid, r_tilde),
                                          pb(ix.cell0), pb(ix.cell0 + 1));
      const Tape::NodeId gates =
          tape.add(tape.linear_lastdim(xt, pb(ix.cell0 + 2), pb(ix.cell0 + 4)),
                   tape.linear_lastdim(hid, pb(ix.cell0 + 3), -1));
      const int de = h.d_e;
      const Tape::NodeId gi = tape.sigmoid(tape.slice_lastdim(gates, 0, de));
      const Tape::NodeId gf =
          tape.sigmoid(tape.slice_lastdim(gates, de, 2 * de));
      const Tape::NodeId gg =
          tape.tanh_op(tape.slice_lastdim(gates, 2 * de, 3 * de));
      const Tape::NodeId go =
          tape.sigmoid(tape.slice_lastdim(gates, 3 * de, 4 * de));
      cell = tape.add(tape.mul(gf, cell), tape.mul(gi, gg));
      hid = tape.mul(go, tape.tanh_op(cell));
    }
    if (h.t_vi > 0)
      nu = tape.linear_lastdim(hid, pb(ix.cell0 + 5), pb(ix.cell0 + 6));
  }
  return {nu, r_tilde};
}

}  // namespace

Tensor problem_map_channels(const GuidanceHyper& h, const PlanningProblem& p) {
  const int d = h.d;
  if (p.grid) {
    const auto& g = *p.grid;
    Tensor out = Tensor::zeros({d, d, 1});
    for (int r = 0; r < d; ++r) {
      const int r0 = (r * g.side) / d;
      const int r1 = std::max(r0 + 1, ((r + 1) * g.side + d - 1) / d);
      for (int c = 0; c < d; ++c) {
        const int c0 = (c * g.side) / d;
        const int c1 = std::max(c0 + 1, ((c + 1) * g.side + d - 1) / d);
        std::uint8_t occ = 0;
        for (int rr = r0; rr < r1 && rr < g.side && !occ; ++rr)
          for (int cc = c0; cc < c1 && cc < g.side; ++cc)
            if (g.occupied(rr, cc)) {
              occ = 1;
              break;
            }
        out.data[(static_cast<std::size_t>(r) * d + c)] = occ;
      }
    }
    return out;
  }

  Tensor out = Tensor::zeros({d, d, 2});
  if (!p.cuboids) return out;
  const double inv = 1.0 / static_cast<double>(d);
  for (int r = 0; r < d; ++r) {
    const double y0 = r * inv, y1 = (r + 1) * inv;
    for (int c = 0; c < d; ++c) {
      const double x0 = c * inv, x1 = (c + 1) * inv;
      // Union of z-extents of boxes whose footprint overlaps this cell.
      std::vector<std::pair<double, double>> spans;
      for (const auto& b : p.cuboids->boxes) {
        if (b.hi[0] <= x0 || b.lo[0] >= x1) continue;
        if (b.hi[1] <= y0 || b.lo[1] >= y1) continue;
        spans.emplace_back(b.lo[2], b.hi[2]);
      }
      double fill = 0.0;
      if (!spans.empty()) {
        std::sort(spans.begin(), spans.end());
        double lo = spans[0].first, hi = spans[0].second;
        for (std::size_t i = 1; i < spans.size(); ++i) {
          if (spans[i].first > hi) {
            fill += hi - lo;
            lo = spans[i].first;
            hi = spans[i].second;
          } else {
            hi = std::max(hi, spans[i].second);
          }
        }
        fill += hi - lo;
      }
      const std::size_t off = (static_cast<std::size_t>(r) * d + c) * 2;
      out.data[off] = spans.empty() ? 0.0 : 1.0;
      out.data[off + 1] = fill;
    }
  }
  return out;
}

AttentionMap embed_state(const GuidanceParams& params, const Config& s) {
  Tape tape(false);
  ParamBinder pb(tape, params);
  const auto mu = wire_embed(tape, params.hyper, pb, s);
  return {tape.value(mu)};
}

LatentValue plan_latent(const GuidanceParams& params,
                        const PlanningProblem& problem) {
  Tape tape(false);
  ParamBinder pb(tape, params);
  const auto mu_goal = wire_embed(tape, params.hyper, pb, problem.goal_center);
  const auto latent =
      wire_latent(tape, params.hyper, pb, mu_goal,
                  problem_map_channels(params.hyper, problem));
  return {tape.value(latent.nu), tape.value(latent.r_tilde)};
}

Tensor features(const LatentValue& latent, const AttentionMap& mu) {
  const Tensor& nu = latent.nu;
  if (nu.shape.size() != 4 ||
      std::vector<int>(nu.shape.begin(), nu.shape.end() - 1) != mu.map.shape)
    throw std::invalid_argument("features: latent/attention shape mismatch");
  const int p = nu.last_dim();
  const std::size_t cells = mu.map.numel();
  Tensor psi = Tensor::zeros({p});
  for (std::size_t l = 0; l < cells; ++l) {
    const double m = mu.map[l];
    const double* row = nu.data.data() + l * p;
    for (int k = 0; k < p; ++k) psi[k] += m * row[k];
  }
  return psi;
}

namespace {

// Mirrors Tape::dense so cached evaluation and tape evaluation agree
// bit for bit.
void dense_eval(const Tensor& x, const Tensor& w, const Tensor& b,
                double* out) {
  const int outn = w.shape[0], in = w.shape[1];
  for (int o = 0; o < outn; ++o) {
    double acc = b[o];
    for (int i = 0; i < in; ++i) acc += w[o * in + i] * x[i];
    out[o] = acc;
  }
}

}  // namespace

double value_from(const GuidanceParams& params, const LatentValue& latent,
                  const Config& s) {
  const ParamIndex ix(params.hyper);
  const Tensor psi = features(latent, embed_state(params, s));
  double v = 0.0;
  dense_eval(psi, params.tensors[ix.w2], params.tensors[ix.w2 + 1], &v);
  return v;
}

Config policy_mean_from(const GuidanceParams& params,
                        const LatentValue& latent, const Config& s) {
  const ParamIndex ix(params.hyper);
  const Tensor psi = features(latent, embed_state(params, s));
  Config mean;
  mean.coords.resize(params.hyper.q);
  dense_eval(psi, params.tensors[ix.w3], params.tensors[ix.w3 + 1],
             mean.coords.data());
  return mean;
}

double value(const GuidanceParams& params, const Config& s,
             const PlanningProblem& problem) {
  return value_from(params, plan_latent(params, problem), s);
}

Config project_candidate(Config candidate, const Config& s, double eta) {
  const double d = distance(candidate, s);
  if (d > eta) {
    const double scale = eta / d;
    for (std::size_t i = 0; i < candidate.size(); ++i)
      candidate.coords[i] = s[i] + scale * (candidate[i] - s[i]);
  }
  for (auto& v : candidate.coords) v = std::clamp(v, 0.0, 1.0);
  return candidate;
}

double gaussian_logprob(const Config& mean, const Config& s_next,
                        double sigma) {
  if (sigma <= 0.0)
    throw std::invalid_argument("gaussian_logprob: sigma must be > 0");
  const double q = static_cast<double>(mean.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double d = s_next[i] - mean[i];
    d2 += d * d;
  }
  return -0.5 * q * std::log(2.0 * M_PI * sigma * sigma) -
         d2 / (2.0 * sigma * sigma);
}

std::vector<Config> policy_sample(const GuidanceParams& params,
                                  const Config& s,
                                  const PlanningProblem& problem, int k,
                                  double eta, Rng& rng) {
  const LatentValue latent = plan_latent(params, problem);
  const Config mean = policy_mean_from(params, latent, s);
  const double sigma = params.hyper.sigma_policy;
  std::vector<Config> out;
  out.reserve(k);
  for (int j = 0; j < k; ++j) {
    Config cand = mean;
    if (sigma > 0.0)
      for (auto& v : cand.coords) v += sigma * rng.normal();
    out.push_back(project_candidate(std::move(cand), s, eta));
  }
  return out;
}

double policy_logprob(const GuidanceParams& params, const Config& s,
                      const Config& s_next, const PlanningProblem& problem) {
  const Config mean =
      policy_mean_from(params, plan_latent(params, problem), s);
  return gaussian_logprob(mean, s_next, params.hyper.sigma_policy);
}

namespace {

struct LossBuild {
  Tape::NodeId node = -1;
  double constant = 0.0;
};

LossBuild build_loss(Tape& tape, ParamBinder& pb, const GuidanceParams& params,
                     const std::vector<TrainingExample>& batch,
                     double lambda_reg) {
  if (batch.empty())
    throw std::invalid_argument("loss_and_grad: empty batch");
  const GuidanceHyper& h = params.hyper;
  const ParamIndex ix(h);
  const double sigma = h.sigma_policy;
  if (sigma <= 0.0)
    throw std::invalid_argument(
        "loss_and_grad: sigma_policy must be > 0 for training");

  LossBuild out;

  for (const auto& ex : batch) {
    if (ex.path.size() < 2)
      throw std::invalid_argument("loss_and_grad: path must have >= 2 states");
    if (ex.path.size() != ex.targets.size())
      throw std::invalid_argument("loss_and_grad: path/target size mismatch");

    const auto mu_goal = wire_embed(tape, h, pb, ex.problem->goal_center);
    const auto latent = wire_latent(tape, h, pb, mu_goal,
                                    problem_map_channels(h, *ex.problem));

    Tape::NodeId entry = -1;
    const std::size_t m = ex.path.size();
    for (std::size_t i = 0; i < m; ++i) {
      const auto mu_i = wire_embed(tape, h, pb, ex.path[i]);
      const auto psi = tape.attention_pool(latent.nu, mu_i);
      const auto v = tape.dense(psi, pb(ix.w2), pb(ix.w2 + 1));
      const auto verr = tape.sum_squares(
          tape.sub(v, tape.leaf(Tensor::from({1}, {ex.targets[i]}))));
      entry = entry < 0 ? verr : tape.add(entry, verr);

      if (i + 1 < m) {
        const auto mean = tape.dense(psi, pb(ix.w3), pb(ix.w3 + 1));
        const auto diff =
            tape.sub(tape.leaf(Tensor::from({h.q}, ex.path[i + 1].coords)),
                     mean);
        const auto nll =
            tape.scale(tape.sum_squares(diff), 1.0 / (2.0 * sigma * sigma));
        entry = tape.add(entry, nll);
        out.constant +=
            0.5 * h.q * std::log(2.0 * M_PI * sigma * sigma);
      }
    }
    if (!std::isfinite(tape.value(entry)[0]))
      throw std::runtime_error(
          "loss_and_grad: non-finite loss for problem seed " +
          std::to_string(ex.problem->seed));
    out.node = out.node < 0 ? entry : tape.add(out.node, entry);
  }

  if (lambda_reg > 0.0) {
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
      const auto reg = tape.scale(
          tape.sum_squares(pb(static_cast<int>(i))), lambda_reg);
      out.node = tape.add(out.node, reg);
    }
  }
  return out;
}

}  // namespace

LossAndGrad loss_and_grad(const GuidanceParams& params,
                          const std::vector<TrainingExample>& batch,
                          double lambda_reg) {
  Tape tape(true);
  // Bind everything up front so every parameter tensor has a gradient slot.
  ParamBinder pb(tape, params);
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    pb(static_cast<int>(i));

  // build_loss uses its own binder view; share the one above by rebuilding
  // bindings through a wrapper is unnecessary because leaves are cheap to
  // look up: we simply re-run binding inside build_loss.
  Tape fresh(true);
  ParamBinder fresh_pb(fresh, params);
  (void)pb;
  (void)tape;

  // Bind in layout order first so gradients are retrievable afterwards.
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    fresh_pb(static_cast<int>(i));
  const LossBuild built = build_loss_with(fresh, fresh_pb, params, batch,
                                          lambda_reg);

  fresh.backward(built.node);
  LossAndGrad out;
  out.loss = fresh.value(built.node)[0] + built.constant;
  out.grads.reserve(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    out.grads.push_back(fresh.grad(fresh_pb.ids[i]));
  return out;
}

double loss_value(const GuidanceParams& params,
                  const std::vector<TrainingExample>& batch,
                  double lambda_reg) {
  Tape tape(false);
  const LossBuild built = build_loss(tape, params, batch, lambda_reg);
  return tape.value(built.node)[0] + built.constant;
}

// --- Guidance interface ----------------------------------------------------

std::vector<Config> Guidance::sample(const Config& s,
                                     const PlanningProblem& p, int k,
                                     double eta, Rng& rng) const {
  const Config mean = policy_mean(s, p);
  const double sigma = sigma_policy();
  std::vector<Config> out;
  out.reserve(k);
  for (int j = 0; j < k; ++j) {
    Config cand = mean;
    if (sigma > 0.0)
      for (auto& v : cand.coords) v += sigma * rng.normal();
    out.push_back(project_candidate(std::move(cand), s, eta));
  }
  return out;
}

NeuralGuidance::NeuralGuidance(GuidanceParams params)
    : params_(std::move(params)) {}

void NeuralGuidance::set_params(GuidanceParams params) {
  std::lock_guard<std::mutex> lock(mutex_);
  params_ = std::move(params);
  ++params_.version;
  cache_.clear();
}

std::shared_ptr<const LatentValue> NeuralGuidance::latent(
    const PlanningProblem& p) const {
  if (cache_enabled_) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(&p);
    if (it != cache_.end()) return it->second;
  }
  auto computed = std::make_shared<LatentValue>(plan_latent(params_, p));
  if (cache_enabled_) {
    std::lock_guard<std::mutex> lock(mutex_);
    cache_.emplace(&p, computed);
  }
  return computed;
}

void NeuralGuidance::enable_cache(bool on) {
  std::lock_guard<std::mutex> lock(mutex_);
  cache_enabled_ = on;
  if (!on) cache_.clear();
}

double NeuralGuidance::value(const Config& s, const PlanningProblem& p) const {
  return value_from(params_, *latent(p), s);
}

Config NeuralGuidance::policy_mean(const Config& s,
                                   const PlanningProblem& p) const {
  return policy_mean_from(params_, *latent(p), s);
}

double NeuralGuidance::logprob(const Config& s, const Config& s_next,
                               const PlanningProblem& p) const {
  const Config mean = policy_mean_from(params_, *latent(p), s);
  return gaussian_logprob(mean, s_next, params_.hyper.sigma_policy);
}

}  // namespace nextmp
