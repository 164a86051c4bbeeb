#pragma once
/**
 * Advantage computation over trajectory trees.
 *
 * Rewards live on leaves. An internal node is scored by the mean reward of
 * its descendant leaves, so every edge can be credited with the eventual
 * outcome of the branch it hangs under. Advantages are z-scores of those
 * scores within a comparison group:
 *
 *   - temporal grouping: the branch schedule splits node steps into segments
 *     (tau_{k+1}, tau_k] bounded by the branch target steps (top boundary
 *     T-1, bottom sentinel -1). Every node at a segment's top step anchors
 *     one chain; the chain's edges run from the anchor down to one step above
 *     the next boundary and all share the anchor's normalized score. Anchors
 *     within one segment form one normalization group per reward column.
 *   - uniform grouping: one group per reward column with statistics taken
 *     over the leaf scores; each edge is scored by its produced node's
 *     descendant mean normalized against those leaf statistics. For a
 *     branch-free batch of chains the two modes coincide exactly.
 *
 * Multiple reward columns are normalized independently per group, combined
 * with user weights, and divided by the number of columns M; turning
 * scale_by_reward_count off multiplies that scaled value back by M, keeping
 * the two variants in an exact factor-of-M relationship. Mixing rewards into
 * one scalar before normalization (the naive baseline) is provided for
 * comparison; it lets a large-scale reward drown the others, which the
 * per-column route avoids by construction.
 */

#include <cmath>
#include <cstddef>
#include <vector>

#include "treeflow/errors.hpp"
#include "treeflow/rollout.hpp"

namespace treeflow::advantage {

// ============================================================
// Group normalization
// ============================================================

/**
 * Population z-score of a group: (v - mean) / (std + eps_std). A group whose
 * denominator is exactly zero (constant values, eps_std = 0) normalizes to
 * all zeros rather than dividing 0/0.
 */
inline std::vector<double> group_normalize(const std::vector<double>& values, double eps_std) {
  if (values.empty()) throw ConfigError("group_normalize: empty group");
  if (!(eps_std >= 0.0)) throw ConfigError("group_normalize: eps_std must be >= 0");
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("group_normalize: non-finite value");
    sum += v;
  }
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double denom = std::sqrt(sq / n) + eps_std;
  std::vector<double> out(values.size(), 0.0);
  if (denom == 0.0) return out;
  for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / denom;
  return out;
}

// ============================================================
// Configuration and reward plumbing
// ============================================================

/** How leaf rewards become per-edge advantages. */
struct GroupingConfig {
  std::vector<double> weights;        // one weight per reward column
  double eps_std = 1e-6;              // added to the group std before dividing
  bool temporal = true;               // segment-wise groups; false = leaf-statistic groups
  bool scale_by_reward_count = true;  // divide the weighted aggregate by M
};

/** Leaf rewards: one row per tree leaf (in tree.leaves order), M columns. */
using RewardMatrix = std::vector<std::vector<double>>;

inline void validate_rewards(const rollout::TrajectoryTree& tree, const RewardMatrix& rewards,
                             const GroupingConfig& cfg) {
  if (cfg.weights.empty()) throw ConfigError("grouping: weights must be non-empty");
  for (double w : cfg.weights)
    if (!std::isfinite(w)) throw ConfigError("grouping: non-finite weight");
  if (!(cfg.eps_std >= 0.0)) throw ConfigError("grouping: eps_std must be >= 0");
  if (rewards.size() != tree.leaves.size())
    throw ShapeError("grouping: one reward row per leaf required");
  for (const auto& row : rewards) {
    if (row.size() != cfg.weights.size())
      throw ShapeError("grouping: reward row width must match weight count");
    for (double r : row)
      if (!std::isfinite(r)) throw NumericError("grouping: non-finite reward");
  }
}

/**
 * Mean reward over each node's descendant leaves, one row of M values per
 * node id. Leaves are accumulated in ascending id order so the result is
 * reproducible addition-order-exactly.
 */
inline std::vector<std::vector<double>> descendant_mean_rewards(
    const rollout::TrajectoryTree& tree, const RewardMatrix& rewards) {
  const size_t M = rewards.empty() ? 0 : rewards[0].size();
  std::vector<int> row_of(tree.nodes.size(), -1);
  for (size_t i = 0; i < tree.leaves.size(); ++i)
    row_of[static_cast<size_t>(tree.leaves[i])] = static_cast<int>(i);

  std::vector<std::vector<double>> out(tree.nodes.size(), std::vector<double>(M, 0.0));
  for (const auto& node : tree.nodes) {
    const auto leaves = rollout::descendants(tree, node.id);
    auto& acc = out[static_cast<size_t>(node.id)];
    for (int leaf : leaves) {
      const auto& row = rewards[static_cast<size_t>(row_of[static_cast<size_t>(leaf)])];
      for (size_t m = 0; m < M; ++m) acc[m] += row[m];
    }
    const auto count = static_cast<double>(leaves.size());
    for (size_t m = 0; m < M; ++m) acc[m] /= count;
  }
  return out;
}

/**
 * Segment boundaries, descending: T-1, then each branch target step, then the
 * sentinel -1. Segment k covers node steps (bounds[k+1], bounds[k]].
 */
inline std::vector<int> segment_boundaries(const rollout::BranchSchedule& schedule, int T) {
  std::vector<int> bounds{T - 1};
  for (const auto& e : schedule.entries)
    if (e.target_step < T - 1) bounds.push_back(e.target_step);
  bounds.push_back(-1);
  return bounds;
}

// ============================================================
// Advantage tables
// ============================================================

/** Per-edge advantages, indexed by the node each edge produces; root = 0. */
struct AdvantageTable {
  std::vector<double> values;
  double at(int node_id) const {
    if (node_id < 0 || static_cast<size_t>(node_id) >= values.size())
      throw ConfigError("advantage table: unknown node id");
    return values[static_cast<size_t>(node_id)];
  }
};

namespace detail {

// Weighted aggregate of per-column z-scores; the unscaled variant is exactly
// the scaled one times M.
inline double aggregate(const std::vector<double>& normalized_cols,
                        const GroupingConfig& cfg) {
  double base = 0.0;
  for (size_t m = 0; m < normalized_cols.size(); ++m) base += cfg.weights[m] * normalized_cols[m];
  const double scaled = base / static_cast<double>(normalized_cols.size());
  return cfg.scale_by_reward_count ? scaled : scaled * static_cast<double>(normalized_cols.size());
}

}  // namespace detail

/**
 * Temporal grouping: per segment, normalize anchor scores per reward column
 * (anchors in ascending id order), aggregate across columns, and write the
 * anchor's value onto every edge of its chain.
 */
inline AdvantageTable temporal_advantages(const rollout::TrajectoryTree& tree,
                                          const RewardMatrix& rewards,
                                          const GroupingConfig& cfg) {
  validate_rewards(tree, rewards, cfg);
  const size_t M = cfg.weights.size();
  const auto desc = descendant_mean_rewards(tree, rewards);
  const auto bounds = segment_boundaries(tree.schedule, tree.time_steps);

  AdvantageTable table;
  table.values.assign(tree.nodes.size(), 0.0);
  for (size_t k = 0; k + 1 < bounds.size(); ++k) {
    const int tau_k = bounds[k];
    const int tau_next = bounds[k + 1];
    const auto& anchors = tree.levels[static_cast<size_t>(tau_k)];

    // One z-score group per reward column across this segment's anchors.
    std::vector<std::vector<double>> normalized(M);
    for (size_t m = 0; m < M; ++m) {
      std::vector<double> scores;
      scores.reserve(anchors.size());
      for (int a : anchors) scores.push_back(desc[static_cast<size_t>(a)][m]);
      normalized[m] = group_normalize(scores, cfg.eps_std);
    }

    for (size_t i = 0; i < anchors.size(); ++i) {
      std::vector<double> cols(M);
      for (size_t m = 0; m < M; ++m) cols[m] = normalized[m][i];
      const double val = detail::aggregate(cols, cfg);
      // Walk the branch-free chain below the anchor; every edge shares val.
      int cur = anchors[i];
      table.values[static_cast<size_t>(cur)] = val;
      while (tree.nodes[static_cast<size_t>(cur)].step > tau_next + 1) {
        const auto& kids = tree.nodes[static_cast<size_t>(cur)].children;
        if (kids.size() != 1)
          throw NumericError("temporal_advantages: branching inside a segment");
        cur = kids[0];
        table.values[static_cast<size_t>(cur)] = val;
      }
    }
  }
  return table;
}

/**
 * Uniform grouping: per reward column, statistics come from the leaf scores;
 * each edge gets its produced node's descendant mean normalized against those
 * leaf statistics. Equals classic per-sample normalization when the tree is a
 * branch-free batch of chains.
 */
inline AdvantageTable uniform_advantages(const rollout::TrajectoryTree& tree,
                                         const RewardMatrix& rewards,
                                         const GroupingConfig& cfg) {
  validate_rewards(tree, rewards, cfg);
  const size_t M = cfg.weights.size();
  const auto desc = descendant_mean_rewards(tree, rewards);

  // Leaf statistics per column, leaves in ascending id order.
  std::vector<double> mean(M, 0.0), denom(M, 0.0);
  const auto n = static_cast<double>(tree.leaves.size());
  for (size_t m = 0; m < M; ++m) {
    double sum = 0.0;
    for (int leaf : tree.leaves) sum += desc[static_cast<size_t>(leaf)][m];
    mean[m] = sum / n;
    double sq = 0.0;
    for (int leaf : tree.leaves) {
      const double d = desc[static_cast<size_t>(leaf)][m] - mean[m];
      sq += d * d;
    }
    denom[m] = std::sqrt(sq / n) + cfg.eps_std;
  }

  AdvantageTable table;
  table.values.assign(tree.nodes.size(), 0.0);
  for (const auto& node : tree.nodes) {
    if (node.parent == -1) continue;
    std::vector<double> cols(M, 0.0);
    for (size_t m = 0; m < M; ++m)
      cols[m] = denom[m] == 0.0
                    ? 0.0
                    : (desc[static_cast<size_t>(node.id)][m] - mean[m]) / denom[m];
    table.values[static_cast<size_t>(node.id)] = detail::aggregate(cols, cfg);
  }
  return table;
}

/** Dispatch on the configured grouping mode. */
inline AdvantageTable tree_advantages(const rollout::TrajectoryTree& tree,
                                      const RewardMatrix& rewards, const GroupingConfig& cfg) {
  return cfg.temporal ? temporal_advantages(tree, rewards, cfg)
                      : uniform_advantages(tree, rewards, cfg);
}

/**
 * Naive baseline: collapse the reward columns into one weighted scalar per
 * leaf first, then normalize that single column. Reward scale leaks into the
 * mixture, unlike the per-column route above.
 */
inline AdvantageTable naive_mixed_advantages(const rollout::TrajectoryTree& tree,
                                             const RewardMatrix& rewards,
                                             const GroupingConfig& cfg) {
  validate_rewards(tree, rewards, cfg);
  RewardMatrix mixed(rewards.size());
  for (size_t i = 0; i < rewards.size(); ++i) {
    double s = 0.0;
    for (size_t m = 0; m < cfg.weights.size(); ++m) s += cfg.weights[m] * rewards[i][m];
    mixed[i] = {s};
  }
  GroupingConfig single = cfg;
  single.weights = {1.0};
  return tree_advantages(tree, mixed, single);
}

}  // namespace treeflow::advantage
