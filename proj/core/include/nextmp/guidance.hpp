#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "nextmp/env.hpp"
#include "nextmp/tape.hpp"
#include "nextmp/tensor.hpp"

namespace nextmp {

enum class PlanCell { MinPool, Lstm };

// Architecture hyperparameters. The latent planning space is a d x d x d_a
// grid with p value channels; spatial attention uses k_w 1x1 convolution
// layers, configuration attention k_h dense layers, and the planning module
// runs t_vi neuralized Bellman updates with either a channel-min-pool cell
// or a shared LSTM cell.
struct GuidanceHyper {
  int d = 15;
  int d_e = 64;
  int d_a = 8;
  int p = 8;
  int k_w = 3;
  int k_h = 2;
  int t_vi = 30;
  int k_a = 4;
  int q = 2;
  RobotKind robot = RobotKind::Point2;
  double sigma_policy = 0.075;
  PlanCell cell = PlanCell::MinPool;
  int spatial_channels = 32;

  // Workspace map channels fed to the planning module: occupancy for grid
  // worlds, top-down occupancy plus column fill height for cuboid worlds.
  int map_channels() const {
    return robot == RobotKind::Spacecraft7 ? 2 : 1;
  }
};

GuidanceHyper default_hyper(RobotKind robot);

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in = 0;
  int fan_out = 0;
  bool is_weight = true;  // biases start at zero
};

// Fixed parameter-tensor order: spatial conv layers (kernel, bias each),
// configuration dense layers (weight, bias each), planning-cell tensors,
// value head, policy head. Checkpoints serialize tensors in this order.
std::vector<TensorSpec> param_layout(const GuidanceHyper& hyper);

struct GuidanceParams {
  GuidanceHyper hyper;
  std::vector<Tensor> tensors;
  int version = 0;

  static GuidanceParams init(const GuidanceHyper& hyper, Rng& rng);
  static GuidanceParams zeros(const GuidanceHyper& hyper);
};

// Nonnegative d x d x d_a tensor summing to 1; soft assignment of a state
// to the learned discretization.
struct AttentionMap {
  Tensor map;
};

// Latent value tensor nu [d, d, d_a, p] after the value-iteration sweep,
// with the learned reward channel kept alongside.
struct LatentValue {
  Tensor nu;
  Tensor r_tilde;
};

// Workspace map resized to d x d (obstacle-preserving max pool for grids;
// top-down projection channels for cuboid sets); shape [d, d, map_channels].
Tensor problem_map_channels(const GuidanceHyper& hyper,
                            const PlanningProblem& p);

AttentionMap embed_state(const GuidanceParams& params, const Config& s);
LatentValue plan_latent(const GuidanceParams& params,
                        const PlanningProblem& problem);
// psi(s)_k = sum_{ijl} nu_{ijlk} mu_{ijl}.
Tensor features(const LatentValue& latent, const AttentionMap& mu);

double value_from(const GuidanceParams& params, const LatentValue& latent,
                  const Config& s);
Config policy_mean_from(const GuidanceParams& params,
                        const LatentValue& latent, const Config& s);

// Uncached single-shot evaluations.
double value(const GuidanceParams& params, const Config& s,
             const PlanningProblem& problem);
std::vector<Config> policy_sample(const GuidanceParams& params,
                                  const Config& s,
                                  const PlanningProblem& problem, int k,
                                  double eta, Rng& rng);
double policy_logprob(const GuidanceParams& params, const Config& s,
                      const Config& s_next, const PlanningProblem& problem);

// Gaussian log density of s_next under N(mean, sigma^2 I).
double gaussian_logprob(const Config& mean, const Config& s_next,
                        double sigma);
// Pulls a candidate into the eta-ball around s, then into [0,1]^q.
Config project_candidate(Config candidate, const Config& s, double eta);

struct TrainingExample {
  std::vector<Config> path;
  std::vector<double> targets;
  std::shared_ptr<const PlanningProblem> problem;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;  // aligned with GuidanceParams::tensors
};

// Loss over the batch: negative policy log likelihood along each path plus
// squared value error against the targets plus lambda_reg * |W|^2.
LossAndGrad loss_and_grad(const GuidanceParams& params,
                          const std::vector<TrainingExample>& batch,
                          double lambda_reg);
// Forward-only loss evaluation (used by finite-difference checks).
double loss_value(const GuidanceParams& params,
                  const std::vector<TrainingExample>& batch,
                  double lambda_reg);

// --- planner-facing interface ---------------------------------------------

// Cost-to-go estimate and expansion proposal distribution. Implementations
// must be safe for concurrent read-only use.
class Guidance {
 public:
  virtual ~Guidance() = default;
  virtual double value(const Config& s, const PlanningProblem& p) const = 0;
  virtual Config policy_mean(const Config& s,
                             const PlanningProblem& p) const = 0;
  virtual double sigma_policy() const = 0;

  // k draws from N(policy_mean, sigma^2 I), each projected into the
  // eta-ball around s intersected with the unit cube.
  std::vector<Config> sample(const Config& s, const PlanningProblem& p, int k,
                             double eta, Rng& rng) const;
};

// Evaluation wrapper around GuidanceParams that caches the latent value
// tensor per problem (keyed by problem address; entries are dropped
// whenever the parameters change).
class NeuralGuidance final : public Guidance {
 public:
  explicit NeuralGuidance(GuidanceParams params);

  const GuidanceParams& params() const { return params_; }
  void set_params(GuidanceParams params);

  double value(const Config& s, const PlanningProblem& p) const override;
  Config policy_mean(const Config& s, const PlanningProblem& p) const override;
  double sigma_policy() const override { return params_.hyper.sigma_policy; }

  double logprob(const Config& s, const Config& s_next,
                 const PlanningProblem& p) const;

  std::shared_ptr<const LatentValue> latent(const PlanningProblem& p) const;
  void enable_cache(bool on);

 private:
  GuidanceParams params_;
  bool cache_enabled_ = true;
  mutable std::mutex mutex_;
  mutable std::unordered_map<const PlanningProblem*,
                             std::shared_ptr<const LatentValue>>
      cache_;
};

// --- checkpoint io ---------------------------------------------------------

// Binary format: magic "NEXTCKPT"; u32 format version (1 = min-pool cell,
// 2 = LSTM cell); u32 fields d, d_e, d_a, p, k_w, k_h, t_vi, k_a, q, robot
// kind; f32 sigma_policy; then each parameter tensor in layout order as a
// u32 rank, u32 dims, and f32 little-endian values.
void save_checkpoint(const GuidanceParams& params, const std::string& path);
GuidanceParams load_checkpoint(const std::string& path);

}  // namespace nextmp
