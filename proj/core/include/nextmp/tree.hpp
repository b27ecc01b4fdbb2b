#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "nextmp/env.hpp"

namespace nextmp {

// Rooted tree over sampled configurations. Node 0 is the start state with
// cost 0; every other node satisfies
//   cost_from_root == parent cost + edge_cost, edge_cost == segment_cost.
class SearchTree {
 public:
  struct Node {
    Config config;
    int parent = -1;
    double cost_from_root = 0.0;
    double edge_cost = 0.0;
    std::vector<int> children;
  };

  explicit SearchTree(Config root);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int i) const { return nodes_[i]; }
  const Config& config(int i) const { return nodes_[i].config; }
  double cost(int i) const { return nodes_[i].cost_from_root; }
  int parent(int i) const { return nodes_[i].parent; }

  int add_node(int parent, Config s, double edge_cost);

  // Moves `node` under `new_parent` and propagates the cost change through
  // all descendants.
  void reparent(int node, int new_parent, double new_edge_cost);

  // Nearest node in configuration-space Euclidean distance; ties go to the
  // lowest index.
  int nearest(const Config& s) const;

 private:
  std::vector<Node> nodes_;
};

struct PlanResult {
  SearchTree tree;
  bool success = false;
  std::optional<std::vector<Config>> path;
  std::optional<double> path_cost;
  long long collision_checks = 0;
  long long samples_used = 0;
};

// Shared per-run state threaded through expansion operators: the problem,
// the expansion RNG stream and the collision-check counter.
struct PlanContext {
  const PlanningProblem& problem;
  Rng& rng;
  long long collision_checks = 0;

  PlanContext(const PlanningProblem& p, Rng& r) : problem(p), rng(r) {}

  bool obstacle_free(const Config& a, const Config& b) {
    ++collision_checks;
    return collision_free(problem, a, b);
  }

  Config sample_free_counted() {
    int attempts = 0;
    Config s = sample_free(problem, rng, &attempts);
    collision_checks += attempts;
    return s;
  }
};

// One expansion proposal: parent index in the tree plus the new state.
using ExpandFn =
    std::function<std::pair<int, Config>(const SearchTree&, PlanContext&)>;
// Invoked after a node has been inserted (index of the new node).
using PostprocessFn = std::function<void(SearchTree&, int, PlanContext&)>;

// Grows a tree from the start state for at most `budget` expansion
// iterations, inserting proposals whose connecting segment is free, and
// stops as soon as an inserted state lies in the goal region. A start
// already inside the goal succeeds immediately with zero samples.
PlanResult tsa_plan(const PlanningProblem& p, const ExpandFn& expand,
                    const PostprocessFn& postprocess, int budget, Rng& rng);

// Uniform random target (goal_center with probability goal_bias) pulled to
// within eta of its nearest tree node.
std::pair<int, Config> rrt_expand(const SearchTree& t, PlanContext& ctx,
                                  double eta, double goal_bias);

// Parent drawn proportional to weight(node index, tree), new state uniform
// in the eta-ball around it intersected with [0,1]^q.
using NodeWeightFn = std::function<double(const SearchTree&, int)>;
std::pair<int, Config> est_expand(const SearchTree& t, PlanContext& ctx,
                                  const NodeWeightFn& weight, double eta);

// Inverse local density weight for EST.
double est_density_weight(const SearchTree& t, int node, double eta);

// Choose-parent plus rewire within radius min(gamma (log n / n)^{1/q}, eta).
// Never increases any cost_from_root.
void rrt_star_rewire(SearchTree& t, PlanContext& ctx, int new_index,
                     double gamma, double eta);

// Root-to-leaf configuration sequence and its total cost.
std::pair<std::vector<Config>, double> extract_path(const SearchTree& t,
                                                    int leaf);

struct PlannerDefaults {
  static constexpr double eta = 0.15;
  static constexpr double goal_bias = 0.1;
  static constexpr double gamma = 1.0;
};

}  // namespace nextmp
