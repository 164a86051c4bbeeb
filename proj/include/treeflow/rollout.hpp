#pragma once

/**
 * Tree-structured SDE rollouts.
 *
 * Branching semantics (normative): a schedule entry (b : B) replicates the
 * stochastic transition that PRODUCES state x_b. The velocity is evaluated
 * once at the parent x_{b+1}, the drift mean is shared, and B independent
 * noise vectors produce B children at step b. The root factor B_0 acts as an
 * implicit entry at target step T-1: one root state x_T, whose first
 * transition is replicated B_0 times.
 *
 * Level cardinalities that follow: N_T = 1, N_{T-1} = B_0, and going down,
 * N_j = N_{j+1} * B when j is a branch target, else N_{j+1}.
 *
 * Node ids: assigned in construction order (root 0, then level by level from
 * step T-1 down, children appended parent-by-parent in parent-id order).
 * Two consequences the rest of the engine relies on:
 * - the descendant leaf set of any node is a contiguous, ascending run of
 *   leaf ids, so sequential reductions over descendants are deterministic;
 * - the noise of the edge producing node n comes from the pure substream
 *   derive(n.id, n.step) of the tree stream, so a tree is reproducible
 *   regardless of construction or scheduling order (see flow::edge_stream).
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "treeflow/errors.hpp"
#include "treeflow/flow.hpp"
#include "treeflow/rng.hpp"

namespace treeflow::rollout {

// ============================================================================
// Branch schedules
// ============================================================================

struct BranchEntry {
  int target_step = 0;  // b: children appear at this step
  int factor = 2;       // B >= 2
};

struct BranchSchedule {
  int root_factor = 1;               // B_0 >= 1
  std::vector<BranchEntry> entries;  // strictly decreasing target_step
};

// Accepts iff: B_0 >= 1, factors >= 2, targets in [0, T-2], strictly
// decreasing, no duplicates (implied by strict ordering).
inline void validate_schedule(const BranchSchedule& s, int T) {
  if (T < 1) throw ConfigError("validate_schedule: T must be >= 1");
  if (s.root_factor < 1) throw ConfigError("validate_schedule: root_factor must be >= 1");
  int prev = T - 1;  // reserved for the implicit root branching
  for (const auto& e : s.entries) {
    if (e.factor < 2) throw ConfigError("validate_schedule: branch factor must be >= 2");
    if (e.target_step < 0 || e.target_step > T - 2)
      throw ConfigError("validate_schedule: branch target must lie in [0, T-2]");
    if (e.target_step >= prev)
      throw ConfigError(
          "validate_schedule: branch targets must be strictly decreasing and distinct");
    prev = e.target_step;
  }
}

inline long leaf_count(const BranchSchedule& s) {
  long n = s.root_factor;
  for (const auto& e : s.entries) n *= e.factor;
  return n;
}

// Node count at each step, index j in [0, T].
inline std::vector<long> level_sizes(const BranchSchedule& s, int T) {
  validate_schedule(s, T);
  std::vector<long> n(static_cast<size_t>(T) + 1, 0);
  n[static_cast<size_t>(T)] = 1;
  for (int j = T - 1; j >= 0; --j) {
    long mult = 1;
    if (j == T - 1)
      mult = s.root_factor;
    else
      for (const auto& e : s.entries)
        if (e.target_step == j) mult = e.factor;
    n[static_cast<size_t>(j)] = n[static_cast<size_t>(j) + 1] * mult;
  }
  return n;
}

// ============================================================================
// Cost accounting
// ============================================================================

struct CostReport {
  long velocity_evals = 0;  // one per live node per step: sum of N_j, j = T..1
  long transitions = 0;     // edges: sum of N_j, j = T-1..0
  long leaves = 0;
};

inline CostReport velocity_eval_count(const BranchSchedule& s, int T) {
  const auto n = level_sizes(s, T);
  CostReport r;
  for (int j = T; j >= 1; --j) r.velocity_evals += n[static_cast<size_t>(j)];
  for (int j = T - 1; j >= 0; --j) r.transitions += n[static_cast<size_t>(j)];
  r.leaves = n[0];
  return r;
}

// ============================================================================
// Trees
// ============================================================================

struct TreeNode {
  int id = 0;
  int step = 0;
  std::vector<double> state;
  int parent = -1;                            // -1 for the root
  std::optional<flow::Transition> incoming;   // absent for the root
  std::vector<int> children;
};

struct TrajectoryTree {
  int condition = 0;
  int time_steps = 0;
  BranchSchedule schedule;
  std::vector<TreeNode> nodes;            // indexed by id
  std::vector<std::vector<int>> levels;   // levels[j] = node ids at step j
  std::vector<int> leaves;                // node ids at step 0, ascending
  long velocity_evals = 0;
};

/**
 * Builds one tree: root x_T drawn from the tree stream's (0, T) substream;
 * at every live node at step p >= 1, the velocity is evaluated once and the
 * resulting shared mean produces the children at step p-1 with independent
 * per-edge noises. Every edge stores its full Transition.
 */
template <typename F>
  requires flow::VelocityField<F>
inline TrajectoryTree rollout_tree(const F& model, int c, const BranchSchedule& schedule,
                                   const flow::TimeGrid& grid, const flow::NoiseSchedule& ns,
                                   const rng::Rng& tree_rng, int data_dim) {
  const int T = grid.steps;
  validate_schedule(schedule, T);

  TrajectoryTree tree;
  tree.condition = c;
  tree.time_steps = T;
  tree.schedule = schedule;
  tree.levels.assign(static_cast<size_t>(T) + 1, {});

  TreeNode root;
  root.id = 0;
  root.step = T;
  root.state = flow::edge_stream(tree_rng, 0, T).gaussian_vec(data_dim);
  tree.nodes.push_back(std::move(root));
  tree.levels[static_cast<size_t>(T)].push_back(0);

  for (int p = T; p >= 1; --p) {
    const int child_step = p - 1;
    int factor = 1;
    if (child_step == T - 1)
      factor = schedule.root_factor;
    else
      for (const auto& e : schedule.entries)
        if (e.target_step == child_step) factor = e.factor;

    for (int parent_id : tree.levels[static_cast<size_t>(p)]) {
      // One velocity evaluation per parent; children share the mean. Copy the
      // parent state: appending children reallocates the node vector.
      const std::vector<double> x = tree.nodes[static_cast<size_t>(parent_id)].state;
      tree.velocity_evals += 1;
      bool first_child = true;
      std::vector<double> shared_mean;
      double noise_scale = 0.0;
      double tau = 0.0, dtj = 0.0;
      for (int k = 0; k < factor; ++k) {
        const int child_id = static_cast<int>(tree.nodes.size());
        auto er = flow::edge_stream(tree_rng, child_id, child_step);
        const auto z = er.gaussian_vec(data_dim);
        flow::Transition tr;
        if (first_child) {
          auto [x_next, t0] = flow::sde_step(model, c, x, p, grid, ns, z);
          shared_mean = t0.mean_old;
          noise_scale = t0.noise_scale;
          tau = t0.t;
          dtj = t0.dt;
          tr = std::move(t0);
          first_child = false;
        } else {
          // Reuse the shared mean: replicate the transition, not the eval.
          tr.step = p;
          tr.t = tau;
          tr.dt = dtj;
          tr.x_from = x;
          tr.condition = c;
          tr.mean_old = shared_mean;
          tr.noise_scale = noise_scale;
          std::vector<double> x_next(shared_mean.size());
          for (size_t i = 0; i < x_next.size(); ++i)
            x_next[i] = shared_mean[i] + noise_scale * z[i];
          for (double xi : x_next)
            if (!std::isfinite(xi)) throw NumericError("rollout_tree: non-finite state");
          tr.x_to = std::move(x_next);
          tr.logp_old = noise_scale > 0.0
                            ? flow::transition_logprob(tr.x_to, tr.mean_old, noise_scale)
                            : 0.0;
        }
        TreeNode child;
        child.id = child_id;
        child.step = child_step;
        child.state = tr.x_to;
        child.parent = parent_id;
        child.incoming = std::move(tr);
        tree.nodes.push_back(std::move(child));
        tree.nodes[static_cast<size_t>(parent_id)].children.push_back(child_id);
        tree.levels[static_cast<size_t>(child_step)].push_back(child_id);
      }
    }
  }

  tree.leaves = tree.levels[0];
  // Cross-check construction against the schedule-implied cardinalities.
  const auto expect = level_sizes(schedule, T);
  for (int j = 0; j <= T; ++j)
    if (static_cast<long>(tree.levels[static_cast<size_t>(j)].size()) !=
        expect[static_cast<size_t>(j)])
      throw NumericError("rollout_tree: level cardinality diverged from schedule");
  return tree;
}

/**
 * G fully independent chains (the no-tree baseline). Chain g draws its root
 * and edges from the derived substream tree_rng.derive(g); with G = 1 this is
 * exactly sample_sde on that substream.
 */
template <typename F>
  requires flow::VelocityField<F>
inline std::vector<std::pair<std::vector<double>, std::vector<flow::Transition>>>
rollout_sequential(const F& model, int c, int G, const flow::TimeGrid& grid,
                   const flow::NoiseSchedule& ns, const rng::Rng& rng_stream, int data_dim) {
  if (G < 1) throw ConfigError("rollout_sequential: G must be >= 1");
  std::vector<std::pair<std::vector<double>, std::vector<flow::Transition>>> out;
  out.reserve(static_cast<size_t>(G));
  for (int g = 0; g < G; ++g) {
    const auto chain = rng_stream.derive(static_cast<uint64_t>(g));
    const auto x_T = flow::edge_stream(chain, 0, grid.steps).gaussian_vec(data_dim);
    out.push_back(flow::sample_sde(model, c, x_T, grid, ns, chain));
  }
  return out;
}

// ============================================================================
// Tree queries
// ============================================================================

// All step-0 node ids reachable from `node_id`, ascending.
inline std::vector<int> descendants(const TrajectoryTree& tree, int node_id) {
  if (node_id < 0 || node_id >= static_cast<int>(tree.nodes.size()))
    throw ConfigError("descendants: unknown node id");
  std::vector<int> out;
  std::vector<int> stack = {node_id};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const auto& n = tree.nodes[static_cast<size_t>(id)];
    if (n.step == 0) out.push_back(id);
    for (int child : n.children) stack.push_back(child);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Mean pairwise Euclidean distance between leaf states.
inline double leaf_diversity(const TrajectoryTree& tree) {
  const auto& leaves = tree.leaves;
  if (leaves.size() < 2) throw ConfigError("leaf_diversity: needs at least 2 leaves");
  double acc = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < leaves.size(); ++i) {
    const auto& a = tree.nodes[static_cast<size_t>(leaves[i])].state;
    for (size_t j = i + 1; j < leaves.size(); ++j) {
      const auto& b = tree.nodes[static_cast<size_t>(leaves[j])].state;
      double d2 = 0.0;
      for (size_t k = 0; k < a.size(); ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
      acc += std::sqrt(d2);
      pairs += 1;
    }
  }
  return acc / static_cast<double>(pairs);
}

}  // namespace treeflow::rollout
