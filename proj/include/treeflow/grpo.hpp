#pragma once
/**
 * Clipped-ratio policy optimization over trajectory trees.
 *
 * Every tree edge is one Gaussian transition x_to ~ N(mean_old, scale^2 I)
 * recorded at rollout time. The trainer re-derives the transition mean under
 * the current parameters through the exact kernels the sampler used (network
 * forward, drift update, Gaussian log-density), so an untouched parameter
 * vector reproduces the stored log-density bit for bit and its likelihood
 * ratio is exactly 1.
 *
 * Per edge with advantage A and ratio r = exp(logp_theta - logp_old):
 *
 *     objective = min(r A, clip(r, 1 - eps, 1 + eps) A) - beta * KL
 *
 * where KL = ||mean_theta - mean_ref||^2 / (2 scale^2) is the closed-form
 * divergence between the two equal-variance Gaussian step policies. The
 * batch objective is the mean over edges enumerated tree by tree, step
 * descending, node id ascending; gradients ascend it via a reverse-mode tape
 * built from the same forward kernels.
 */

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "treeflow/advantage.hpp"
#include "treeflow/errors.hpp"
#include "treeflow/flow.hpp"
#include "treeflow/metrics.hpp"
#include "treeflow/nn.hpp"
#include "treeflow/rng.hpp"
#include "treeflow/rollout.hpp"

namespace treeflow::grpo {

// ============================================================
// Configuration
// ============================================================

struct GrpoConfig {
  int time_steps = 10;
  rollout::BranchSchedule schedule;
  flow::NoiseSchedule noise;
  advantage::GroupingConfig grouping;
  double clip_epsilon = 0.2;
  double kl_coef = 0.0;
  int trees_per_iter = 1;
  int conditions = 1;       // rollouts cycle through condition ids round-robin
  bool naive_mix = false;   // mix rewards into one scalar before normalizing
};

inline void validate_config(const GrpoConfig& cfg) {
  if (cfg.time_steps < 1) throw ConfigError("grpo: time_steps must be >= 1");
  rollout::validate_schedule(cfg.schedule, cfg.time_steps);
  if (!(cfg.noise.noise_level > 0.0))
    throw ConfigError("grpo: stochastic rollouts require noise_level > 0");
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0))
    throw ConfigError("grpo: clip_epsilon must lie in (0, 1)");
  if (!(cfg.kl_coef >= 0.0)) throw ConfigError("grpo: kl_coef must be >= 0");
  if (cfg.trees_per_iter < 1) throw ConfigError("grpo: trees_per_iter must be >= 1");
  if (cfg.conditions < 1) throw ConfigError("grpo: conditions must be >= 1");
}

// ============================================================
// Per-edge quantities (plain evaluation, no tape)
// ============================================================

/** One transition with its credited advantage. */
struct Edge {
  const flow::Transition* tr = nullptr;
  double advantage = 0.0;
};

/** Canonical edge order within a tree: step descending, node id ascending. */
inline std::vector<Edge> collect_edges(const rollout::TrajectoryTree& tree,
                                       const advantage::AdvantageTable& table) {
  std::vector<Edge> edges;
  for (int s = tree.time_steps - 1; s >= 0; --s)
    for (int id : tree.levels[static_cast<size_t>(s)])
      edges.push_back({&*tree.nodes[static_cast<size_t>(id)].incoming, table.at(id)});
  return edges;
}

/** Transition mean under the given parameters, via the sampler's kernels. */
inline std::vector<double> transition_mean_under(const nn::MlpSpec& spec,
                                                 const nn::ParamVector& params, int cond_dim,
                                                 const flow::Transition& tr,
                                                 const flow::NoiseSchedule& ns) {
  const auto input = flow::model_input(tr.x_from, tr.t, tr.condition, cond_dim);
  const auto v = nn::mlp_forward(spec, params, input);
  const auto k = flow::transition_coef(tr.t, tr.dt, ns);
  std::vector<double> mean(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    mean[i] = flow::transition_mean_coord(tr.x_from[i], v[i], k);
  return mean;
}

inline double edge_logp(const nn::MlpSpec& spec, const nn::ParamVector& params, int cond_dim,
                        const flow::Transition& tr, const flow::NoiseSchedule& ns) {
  if (!(tr.noise_scale > 0.0))
    throw ConfigError("grpo: transition has zero noise scale, no density to train");
  return nn::gaussian_log_density(tr.x_to, transition_mean_under(spec, params, cond_dim, tr, ns),
                                  tr.noise_scale);
}

/** Likelihood ratio vs. the rollout-time density; exactly 1 at the sampler's params. */
inline double edge_ratio(const nn::MlpSpec& spec, const nn::ParamVector& params, int cond_dim,
                         const flow::Transition& tr, const flow::NoiseSchedule& ns) {
  return std::exp(edge_logp(spec, params, cond_dim, tr, ns) - tr.logp_old);
}

/** min(r A, clip(r) A): pessimistic between the raw and clipped estimate. */
inline double clipped_objective(double ratio, double advantage, double clip_epsilon) {
  const double clipped = std::min(std::max(ratio, 1.0 - clip_epsilon), 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

/** Closed-form KL between equal-variance Gaussian steps. */
inline double kl_penalty(const std::vector<double>& mean_theta,
                         const std::vector<double>& mean_ref, double scale) {
  if (mean_theta.size() != mean_ref.size()) throw ShapeError("kl_penalty: size mismatch");
  if (!(scale > 0.0)) throw ConfigError("kl_penalty: scale must be > 0");
  double sq = 0.0;
  for (size_t i = 0; i < mean_theta.size(); ++i) {
    const double d = mean_theta[i] - mean_ref[i];
    sq += d * d;
  }
  return sq / (2.0 * scale * scale);
}

// ============================================================
// Batch objective and its gradient
// ============================================================

/**
 * Mean edge objective under `params`. `ref_params` is consulted only when
 * kl_coef > 0. Matches the taped value bit for bit: same kernels, same order.
 */
inline double batch_objective(const nn::MlpSpec& spec, const nn::ParamVector& params,
                              const nn::ParamVector& ref_params, int cond_dim,
                              const std::vector<Edge>& edges, const flow::NoiseSchedule& ns,
                              double clip_epsilon, double kl_coef) {
  if (edges.empty()) throw ConfigError("grpo: empty edge batch");
  double sum = 0.0;
  for (const auto& e : edges) {
    const auto& tr = *e.tr;
    const double lp = edge_logp(spec, params, cond_dim, tr, ns);
    const double r = std::exp(lp - tr.logp_old);
    double obj = clipped_objective(r, e.advantage, clip_epsilon);
    if (kl_coef > 0.0) {
      const auto mean_theta = transition_mean_under(spec, params, cond_dim, tr, ns);
      const auto mean_ref = transition_mean_under(spec, ref_params, cond_dim, tr, ns);
      double sq = 0.0;
      for (size_t i = 0; i < mean_theta.size(); ++i) {
        const double d = mean_theta[i] - mean_ref[i];
        sq += d * d;
      }
      obj = obj - (kl_coef / (2.0 * tr.noise_scale * tr.noise_scale)) * sq;
    }
    sum += obj;
  }
  return sum / static_cast<double>(edges.size());
}

namespace detail {

inline nn::GradTape::Scalar edge_objective_on_tape(nn::GradTape& tape, const Edge& e,
                                                   int cond_dim, const flow::NoiseSchedule& ns,
                                                   double clip_epsilon, double kl_coef,
                                                   const std::vector<double>* ref_mean) {
  const auto& tr = *e.tr;
  if (!(tr.noise_scale > 0.0))
    throw ConfigError("grpo: transition has zero noise scale, no density to train");
  const auto input = flow::model_input(tr.x_from, tr.t, tr.condition, cond_dim);
  auto v = tape.mlp(input);
  const auto k = flow::transition_coef(tr.t, tr.dt, ns);
  const auto& x_from = tr.x_from;
  auto mean = tape.affine_map(
      v, [&x_from, k](int i, double vi) { return flow::transition_mean_coord(x_from[i], vi, k); },
      flow::transition_mean_slope(k), "transition_mean");
  auto lp = tape.gaussian_logp(mean, tr.x_to, tr.noise_scale);
  auto ratio = tape.exp(tape.add_const(lp, -tr.logp_old));
  auto unclipped = tape.mul_const(ratio, e.advantage);
  auto clipped =
      tape.mul_const(tape.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon), e.advantage);
  auto obj = tape.min(unclipped, clipped);
  if (kl_coef > 0.0) {
    auto sq = tape.squared_distance(mean, *ref_mean);
    obj = tape.sub(obj,
                   tape.mul_const(sq, kl_coef / (2.0 * tr.noise_scale * tr.noise_scale)));
  }
  return obj;
}

}  // namespace detail

/** Value and parameter gradient of the batch objective at `params`. */
inline nn::GradResult batch_objective_grad(const nn::MlpSpec& spec,
                                           const nn::ParamVector& params,
                                           const nn::ParamVector& ref_params, int cond_dim,
                                           const std::vector<Edge>& edges,
                                           const flow::NoiseSchedule& ns, double clip_epsilon,
                                           double kl_coef) {
  if (edges.empty()) throw ConfigError("grpo: empty edge batch");
  // Reference means are constants of the optimization; evaluate them outside
  // the tape.
  std::vector<std::vector<double>> ref_means;
  if (kl_coef > 0.0) {
    ref_means.reserve(edges.size());
    for (const auto& e : edges)
      ref_means.push_back(transition_mean_under(spec, ref_params, cond_dim, *e.tr, ns));
  }
  return nn::grad_scalar(spec, params, [&](nn::GradTape& tape) {
    std::vector<nn::GradTape::Scalar> objs;
    objs.reserve(edges.size());
    for (size_t i = 0; i < edges.size(); ++i)
      objs.push_back(detail::edge_objective_on_tape(
          tape, edges[i], cond_dim, ns, clip_epsilon, kl_coef,
          kl_coef > 0.0 ? &ref_means[i] : nullptr));
    return tape.mean(objs);
  });
}

// ============================================================
// Training loop
// ============================================================

struct TrainState {
  flow::VelocityModel model;   // parameters updated in place
  nn::ParamVector params_ref;  // frozen reference for the KL penalty
  nn::AdamState adam;
  rng::Rng run_rng;
  long iteration = 0;
  long tree_counter = 0;   // global rollout index, drives per-tree streams
  long velocity_evals = 0; // cumulative network evaluations spent on rollouts

  TrainState(flow::VelocityModel m, uint64_t seed, double lr)
      : model(std::move(m)), params_ref(model.params), run_rng(seed) {
    adam.lr = lr;
  }
};

/**
 * One optimizer iteration: roll out trees under the current parameters,
 * credit edges with grouped advantages, take one ascent step on the batch
 * objective, and report metrics. Objective and gradient norm describe the
 * pre-update point; ratio statistics compare the updated parameters against
 * the rollout snapshot.
 */
template <typename RewardFn>
inline metrics::MetricRecord train_iteration(TrainState& st, const GrpoConfig& cfg,
                                             const RewardFn& reward_fn) {
  validate_config(cfg);
  const size_t M = cfg.grouping.weights.size();
  const flow::TimeGrid grid(cfg.time_steps);
  const int cond_dim = st.model.cond_dim;
  const int data_dim = st.model.data_dim();

  // Roll out all trees first so the edge pointers stay stable.
  std::vector<rollout::TrajectoryTree> trees;
  trees.reserve(static_cast<size_t>(cfg.trees_per_iter));
  for (int p = 0; p < cfg.trees_per_iter; ++p) {
    const int c = static_cast<int>((st.iteration * cfg.trees_per_iter + p) % cfg.conditions);
    const rng::Rng tree_rng = st.run_rng.derive(static_cast<uint64_t>(st.tree_counter));
    st.tree_counter += 1;
    trees.push_back(rollout::rollout_tree(st.model, c, cfg.schedule, grid, cfg.noise, tree_rng,
                                          data_dim));
    st.velocity_evals += trees.back().velocity_evals;
  }

  metrics::MetricRecord rec;
  rec.iteration = st.iteration;
  rec.mean_reward.assign(M, 0.0);
  long leaf_total = 0;
  double diversity_sum = 0.0;

  std::vector<Edge> edges;
  for (const auto& tree : trees) {
    advantage::RewardMatrix rewards;
    rewards.reserve(tree.leaves.size());
    for (int leaf : tree.leaves) {
      auto row = reward_fn(tree.nodes[static_cast<size_t>(leaf)].state, tree.condition);
      if (row.size() != M) throw ShapeError("grpo: reward width must match grouping weights");
      for (size_t m = 0; m < M; ++m) rec.mean_reward[m] += row[m];
      rewards.push_back(std::move(row));
    }
    leaf_total += static_cast<long>(tree.leaves.size());
    diversity_sum += tree.leaves.size() >= 2 ? rollout::leaf_diversity(tree) : 0.0;

    const auto table = cfg.naive_mix
                           ? advantage::naive_mixed_advantages(tree, rewards, cfg.grouping)
                           : advantage::tree_advantages(tree, rewards, cfg.grouping);
    const auto tree_edges = collect_edges(tree, table);
    edges.insert(edges.end(), tree_edges.begin(), tree_edges.end());
  }
  for (size_t m = 0; m < M; ++m) rec.mean_reward[m] /= static_cast<double>(leaf_total);
  rec.leaf_diversity = diversity_sum / static_cast<double>(trees.size());

  // Ascent step; objective and gradient norm refer to the pre-update point.
  const auto grad = batch_objective_grad(st.model.spec, st.model.params, st.params_ref, cond_dim,
                                         edges, cfg.noise, cfg.clip_epsilon, cfg.kl_coef);
  rec.objective = grad.value;
  double norm_sq = 0.0;
  for (double g : grad.gradient) norm_sq += g * g;
  rec.grad_norm = std::sqrt(norm_sq);

  std::vector<double> descent(grad.gradient.size());
  for (size_t i = 0; i < descent.size(); ++i) descent[i] = -grad.gradient[i];
  nn::adam_step(st.model.params, descent, st.adam);

  // Ratio statistics of the updated parameters against the rollout snapshot.
  double abs_sum = 0.0;
  long clipped_count = 0;
  for (const auto& e : edges) {
    const double r = edge_ratio(st.model.spec, st.model.params, cond_dim, *e.tr, cfg.noise);
    abs_sum += std::abs(r - 1.0);
    if (r < 1.0 - cfg.clip_epsilon || r > 1.0 + cfg.clip_epsilon) clipped_count += 1;
  }
  rec.mean_abs_ratio_minus_one = abs_sum / static_cast<double>(edges.size());
  rec.clip_fraction = static_cast<double>(clipped_count) / static_cast<double>(edges.size());
  rec.velocity_evals = st.velocity_evals;

  st.iteration += 1;
  return rec;
}

/** Run `iterations` steps, stamping cumulative wall-clock time per record. */
template <typename RewardFn>
inline std::vector<metrics::MetricRecord> train(
    TrainState& st, const GrpoConfig& cfg, const RewardFn& reward_fn, int iterations,
    const std::function<void(const metrics::MetricRecord&)>& on_record = {}) {
  if (iterations < 1) throw ConfigError("grpo: iterations must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  std::vector<metrics::MetricRecord> records;
  records.reserve(static_cast<size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    auto rec = train_iteration(st, cfg, reward_fn);
    rec.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_record) on_record(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace treeflow::grpo
