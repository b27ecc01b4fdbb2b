#include "nextmp/tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nextmp {

SearchTree::SearchTree(Config root) {
  Node n;
  n.config = std::move(root);
  nodes_.push_back(std::move(n));
}

int SearchTree::add_node(int parent, Config s, double edge_cost) {
  if (parent < 0 || parent >= size())
    throw std::invalid_argument("add_node: bad parent index");
  Node n;
  n.config = std::move(s);
  n.parent = parent;
  n.edge_cost = edge_cost;
  n.cost_from_root = nodes_[parent].cost_from_root + edge_cost;
  const int idx = size();
  nodes_.push_back(std::move(n));
  nodes_[parent].children.push_back(idx);
  return idx;
}

void SearchTree::reparent(int node, int new_parent, double new_edge_cost) {
  Node& n = nodes_[node];
  auto& siblings = nodes_[n.parent].children;
  siblings.erase(std::find(siblings.begin(), siblings.end(), node));
  n.parent = new_parent;
  n.edge_cost = new_edge_cost;
  nodes_[new_parent].children.push_back(node);

  const double new_cost = nodes_[new_parent].cost_from_root + new_edge_cost;
  const double delta = new_cost - n.cost_from_root;
  // Propagate the change through the whole subtree.
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    nodes_[i].cost_from_root += delta;
    for (int c : nodes_[i].children) stack.push_back(c);
  }
}

int SearchTree::nearest(const Config& s) const {
  int best = 0;
  double best_d = distance(nodes_[0].config, s);
  for (int i = 1; i < size(); ++i) {
    const double d = distance(nodes_[i].config, s);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

PlanResult tsa_plan(const PlanningProblem& p, const ExpandFn& expand,
                    const PostprocessFn& postprocess, int budget, Rng& rng) {
  PlanContext ctx(p, rng);
  PlanResult result{SearchTree(p.start)};

  auto finish = [&](int goal_leaf) {
    result.success = true;
    auto [path, cost] = extract_path(result.tree, goal_leaf);
    result.path = std::move(path);
    result.path_cost = cost;
  };

  if (in_goal(p, p.start)) {
    finish(0);
    result.collision_checks = ctx.collision_checks;
    return result;
  }

  for (int t = 0; t < budget; ++t) {
    ++result.samples_used;
    auto [parent, s_new] = expand(result.tree, ctx);
    if (!ctx.obstacle_free(result.tree.config(parent), s_new)) continue;
    const double edge = segment_cost(p, result.tree.config(parent), s_new);
    const int idx = result.tree.add_node(parent, std::move(s_new), edge);
    if (postprocess) postprocess(result.tree, idx, ctx);
    if (in_goal(p, result.tree.config(idx))) {
      finish(idx);
      break;
    }
  }
  result.collision_checks = ctx.collision_checks;
  return result;
}

std::pair<int, Config> rrt_expand(const SearchTree& t, PlanContext& ctx,
                                  double eta, double goal_bias) {
  Config target;
  if (ctx.rng.uniform() < goal_bias) {
    target = ctx.problem.goal_center;
  } else {
    target = ctx.sample_free_counted();
  }
  const int parent = t.nearest(target);
  const Config& from = t.config(parent);
  const double d = distance(from, target);
  if (d <= eta) return {parent, target};
  Config s_new;
  s_new.coords.resize(target.size());
  const double scale = eta / d;
  for (std::size_t i = 0; i < target.size(); ++i)
    s_new.coords[i] = from[i] + scale * (target[i] - from[i]);
  return {parent, s_new};
}

std::pair<int, Config> est_expand(const SearchTree& t, PlanContext& ctx,
                                  const NodeWeightFn& weight, double eta) {
  const int n = t.size();
  std::vector<double> w(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = weight(t, i);
    total += w[i];
  }
  double pick = ctx.rng.uniform() * total;
  int parent = n - 1;
  for (int i = 0; i < n; ++i) {
    pick -= w[i];
    if (pick < 0.0) {
      parent = i;
      break;
    }
  }

  const Config& from = t.config(parent);
  const std::size_t q = from.size();
  Config s_new;
  s_new.coords.resize(q);
  // Uniform in the eta-ball around the parent, rejecting draws that fall
  // outside [0,1]^q. The ball always intersects the cube, so this
  // terminates quickly; after a generous number of misses we clamp.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double norm2 = 0.0;
    std::vector<double> dir(q);
    for (std::size_t i = 0; i < q; ++i) {
      dir[i] = ctx.rng.normal();
      norm2 += dir[i] * dir[i];
    }
    const double norm = std::sqrt(std::max(norm2, 1e-300));
    const double radius =
        eta * std::pow(ctx.rng.uniform(), 1.0 / static_cast<double>(q));
    bool inside = true;
    for (std::size_t i = 0; i < q; ++i) {
      s_new.coords[i] = from[i] + radius * dir[i] / norm;
      if (s_new.coords[i] < 0.0 || s_new.coords[i] > 1.0) inside = false;
    }
    if (inside) return {parent, s_new};
  }
  for (std::size_t i = 0; i < q; ++i)
    s_new.coords[i] = std::clamp(s_new.coords[i], 0.0, 1.0);
  return {parent, s_new};
}

double est_density_weight(const SearchTree& t, int node, double eta) {
  int neighbors = 0;
  for (int i = 0; i < t.size(); ++i)
    if (i != node && distance(t.config(i), t.config(node)) <= eta) ++neighbors;
  return 1.0 / (1.0 + neighbors);
}

void rrt_star_rewire(SearchTree& t, PlanContext& ctx, int new_index,
                     double gamma, double eta) {
  const int n = t.size();
  if (n < 2) return;
  const double q = static_cast<double>(ctx.problem.robot.dof());
  const double radius = std::min(
      gamma * std::pow(std::log(static_cast<double>(n)) / n, 1.0 / q), eta);

  const Config& s_new = t.config(new_index);
  std::vector<int> neighbors;
  for (int i = 0; i < n; ++i) {
    if (i == new_index) continue;
    if (distance(t.config(i), s_new) <= radius) neighbors.push_back(i);
  }
  if (neighbors.empty()) return;

  // Choose-parent: reparent the new node to the neighbor minimizing its
  // cost from the root. Strict improvement keeps the lowest index on ties.
  int best_parent = t.parent(new_index);
  double best_cost = t.cost(new_index);
  double best_edge = t.node(new_index).edge_cost;
  for (int nb : neighbors) {
    if (nb == best_parent) continue;
    const double edge = segment_cost(ctx.problem, t.config(nb), s_new);
    const double c = t.cost(nb) + edge;
    if (c + 1e-12 < best_cost && ctx.obstacle_free(t.config(nb), s_new)) {
      best_cost = c;
      best_parent = nb;
      best_edge = edge;
    }
  }
  if (best_parent != t.parent(new_index))
    t.reparent(new_index, best_parent, best_edge);

  // Rewire: route neighbors through the new node when that is cheaper.
  for (int nb : neighbors) {
    if (nb == t.parent(new_index)) continue;
    const double edge = segment_cost(ctx.problem, s_new, t.config(nb));
    const double through = t.cost(new_index) + edge;
    if (through + 1e-12 < t.cost(nb) &&
        ctx.obstacle_free(s_new, t.config(nb))) {
      t.reparent(nb, new_index, edge);
    }
  }
}

std::pair<std::vector<Config>, double> extract_path(const SearchTree& t,
                                                    int leaf) {
  if (leaf < 0 || leaf >= t.size())
    throw std::invalid_argument("extract_path: bad leaf index");
  std::vector<Config> path;
  for (int i = leaf; i != -1; i = t.parent(i)) path.push_back(t.config(i));
  std::reverse(path.begin(), path.end());
  return {std::move(path), t.cost(leaf)};
}

}  // namespace nextmp
