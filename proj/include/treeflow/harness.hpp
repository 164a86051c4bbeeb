#pragma once
/**
 * Run harness: resolves a flat config into typed settings, assembles models,
 * environments, and reward stacks, and drives the six run modes behind the
 * CLI (pretrain, align, eval, diversity, noise-table, ablate).
 *
 * Every run writes into its output directory:
 *   - config_resolved.txt: the exact settings used, reloadable as a config;
 *   - run.json: a machine-readable summary of what happened;
 *   - mode-specific outputs (checkpoints, metrics.jsonl + metrics.csv, ...).
 *
 * Reruns with the same seed and settings reproduce every output byte for
 * byte except wall-clock fields.
 */

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "treeflow/config.hpp"
#include "treeflow/envs.hpp"
#include "treeflow/errors.hpp"
#include "treeflow/flow.hpp"
#include "treeflow/grpo.hpp"
#include "treeflow/metrics.hpp"
#include "treeflow/nn.hpp"
#include "treeflow/rng.hpp"
#include "treeflow/rollout.hpp"

namespace treeflow::harness {

// ============================================================
// Settings: the resolved, validated view of a config
// ============================================================

struct Settings {
  // run
  uint64_t seed = 0;
  int time_steps = 10;
  // model
  std::vector<int> hidden = {32, 32};
  nn::Activation activation = nn::Activation::Tanh;
  // environment and rewards
  envs::GaussMixEnv env;
  envs::RewardParams reward_params;
  std::vector<std::string> reward_names = {"target"};
  std::vector<double> weights = {1.0};
  // pretraining
  int pretrain_iters = 2500;
  int pretrain_batch = 128;
  double pretrain_lr = 1e-3;
  // alignment
  int iterations = 100;
  double learning_rate = 1e-3;
  int trees_per_iter = 1;
  int root_factor = 8;
  std::string branch_schedule = "2:3,4:2";
  double clip_epsilon = 0.2;
  double kl_coef = 0.0;
  double eps_std = 1e-6;
  double noise_level = 0.7;
  bool temporal = true;
  bool scale_by_reward_count = true;
  bool naive_mix = false;
  // io
  std::string checkpoint_in;
  std::string checkpoint_out;
  // eval / diversity / tables
  int eval_samples = 500;
  int diversity_trees = 20;
  int diversity_branch_factor = 2;
  std::vector<long> noise_table_steps = {6, 10, 28, 40};
};

inline const std::set<std::string>& allowed_keys() {
  static const std::set<std::string> keys = {
      "seed",          "time_steps",      "hidden",
      "activation",    "modes",           "data_std",
      "target_std",    "ring_radius",     "ring_std",
      "ring_scale",    "angle_amplitude", "rewards",
      "weights",       "pretrain_iters",  "pretrain_batch",
      "pretrain_lr",   "iterations",      "learning_rate",
      "trees_per_iter", "root_factor",    "branch_schedule",
      "clip_epsilon",  "kl_coef",         "eps_std",
      "noise_level",   "temporal",        "scale_by_reward_count",
      "naive_mix",     "checkpoint_in",   "checkpoint_out",
      "eval_samples",  "diversity_trees", "diversity_branch_factor",
      "noise_table_steps"};
  return keys;
}

inline Settings settings_from(const config::Config& cfg) {
  cfg.require_known(allowed_keys());
  Settings s;
  s.seed = cfg.get_uint64("seed", s.seed);
  s.time_steps = static_cast<int>(cfg.get_int("time_steps", s.time_steps));

  s.hidden.clear();
  for (long h : cfg.get_int_list("hidden", {32, 32})) {
    if (h < 1) throw ConfigError("config key 'hidden': layer widths must be >= 1");
    s.hidden.push_back(static_cast<int>(h));
  }
  const std::string act = cfg.get_string("activation", "tanh");
  if (act == "tanh")
    s.activation = nn::Activation::Tanh;
  else if (act == "relu")
    s.activation = nn::Activation::Relu;
  else
    throw ConfigError("config key 'activation': expected tanh or relu, got '" + act + "'");

  s.env.modes = static_cast<int>(cfg.get_int("modes", s.env.modes));
  s.env.data_std = cfg.get_double("data_std", s.env.data_std);
  envs::validate_env(s.env);

  s.reward_params.target_std = cfg.get_double("target_std", s.reward_params.target_std);
  s.reward_params.ring_radius = cfg.get_double("ring_radius", s.reward_params.ring_radius);
  s.reward_params.ring_std = cfg.get_double("ring_std", s.reward_params.ring_std);
  s.reward_params.ring_scale = cfg.get_double("ring_scale", s.reward_params.ring_scale);
  s.reward_params.angle_amplitude =
      cfg.get_double("angle_amplitude", s.reward_params.angle_amplitude);
  envs::validate_rewards(s.reward_params);

  s.reward_names = cfg.get_string_list("rewards", s.reward_names);
  s.weights = cfg.get_double_list("weights", s.weights);
  if (s.reward_names.empty()) throw ConfigError("config key 'rewards': need at least one");
  if (s.reward_names.size() != s.weights.size())
    throw ConfigError("config keys 'rewards' and 'weights' must have equal length");
  for (const auto& name : s.reward_names)
    if (name != "target" && name != "ring" && name != "angle")
      throw ConfigError("config key 'rewards': unknown reward '" + name + "'");

  s.pretrain_iters = static_cast<int>(cfg.get_int("pretrain_iters", s.pretrain_iters));
  s.pretrain_batch = static_cast<int>(cfg.get_int("pretrain_batch", s.pretrain_batch));
  s.pretrain_lr = cfg.get_double("pretrain_lr", s.pretrain_lr);
  if (s.pretrain_iters < 1 || s.pretrain_batch < 1 || !(s.pretrain_lr > 0.0))
    throw ConfigError("config: pretrain settings must be positive");

  s.iterations = static_cast<int>(cfg.get_int("iterations", s.iterations));
  s.learning_rate = cfg.get_double("learning_rate", s.learning_rate);
  s.trees_per_iter = static_cast<int>(cfg.get_int("trees_per_iter", s.trees_per_iter));
  s.root_factor = static_cast<int>(cfg.get_int("root_factor", s.root_factor));
  s.branch_schedule = cfg.get_string("branch_schedule", s.branch_schedule);
  s.clip_epsilon = cfg.get_double("clip_epsilon", s.clip_epsilon);
  s.kl_coef = cfg.get_double("kl_coef", s.kl_coef);
  s.eps_std = cfg.get_double("eps_std", s.eps_std);
  s.noise_level = cfg.get_double("noise_level", s.noise_level);
  s.temporal = cfg.get_bool("temporal", s.temporal);
  s.scale_by_reward_count = cfg.get_bool("scale_by_reward_count", s.scale_by_reward_count);
  s.naive_mix = cfg.get_bool("naive_mix", s.naive_mix);
  if (!(s.eps_std > 0.0)) throw ConfigError("config key 'eps_std': must be > 0");

  s.checkpoint_in = cfg.get_string("checkpoint_in", s.checkpoint_in);
  s.checkpoint_out = cfg.get_string("checkpoint_out", s.checkpoint_out);
  s.eval_samples = static_cast<int>(cfg.get_int("eval_samples", s.eval_samples));
  s.diversity_trees = static_cast<int>(cfg.get_int("diversity_trees", s.diversity_trees));
  s.diversity_branch_factor =
      static_cast<int>(cfg.get_int("diversity_branch_factor", s.diversity_branch_factor));
  s.noise_table_steps = cfg.get_int_list("noise_table_steps", s.noise_table_steps);
  if (s.eval_samples < 1 || s.diversity_trees < 1 || s.diversity_branch_factor < 2)
    throw ConfigError("config: eval/diversity settings out of range");
  for (long T : s.noise_table_steps)
    if (T < 1) throw ConfigError("config key 'noise_table_steps': steps must be >= 1");

  // Parse once here so bad schedules fail at settings time with the key name.
  config::parse_branch_schedule(s.branch_schedule, s.time_steps, s.root_factor);
  return s;
}

namespace detail {

inline std::string join_list(const std::vector<std::string>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
  return out;
}

template <typename T>
inline std::string join_nums(const std::vector<T>& xs) {
  std::ostringstream out;
  out.precision(17);
  for (size_t i = 0; i < xs.size(); ++i) out << (i ? "," : "") << xs[i];
  return out.str();
}

}  // namespace detail

/** Serialize resolved settings as a reloadable config. */
inline std::string settings_to_text(const Settings& s) {
  std::ostringstream out;
  out.precision(17);
  out << "seed = " << s.seed << '\n'
      << "time_steps = " << s.time_steps << '\n'
      << "hidden = " << detail::join_nums(s.hidden) << '\n'
      << "activation = " << (s.activation == nn::Activation::Tanh ? "tanh" : "relu") << '\n'
      << "modes = " << s.env.modes << '\n'
      << "data_std = " << s.env.data_std << '\n'
      << "target_std = " << s.reward_params.target_std << '\n'
      << "ring_radius = " << s.reward_params.ring_radius << '\n'
      << "ring_std = " << s.reward_params.ring_std << '\n'
      << "ring_scale = " << s.reward_params.ring_scale << '\n'
      << "angle_amplitude = " << s.reward_params.angle_amplitude << '\n'
      << "rewards = " << detail::join_list(s.reward_names) << '\n'
      << "weights = " << detail::join_nums(s.weights) << '\n'
      << "pretrain_iters = " << s.pretrain_iters << '\n'
      << "pretrain_batch = " << s.pretrain_batch << '\n'
      << "pretrain_lr = " << s.pretrain_lr << '\n'
      << "iterations = " << s.iterations << '\n'
      << "learning_rate = " << s.learning_rate << '\n'
      << "trees_per_iter = " << s.trees_per_iter << '\n'
      << "root_factor = " << s.root_factor << '\n'
      << "branch_schedule = " << s.branch_schedule << '\n'
      << "clip_epsilon = " << s.clip_epsilon << '\n'
      << "kl_coef = " << s.kl_coef << '\n'
      << "eps_std = " << s.eps_std << '\n'
      << "noise_level = " << s.noise_level << '\n'
      << "temporal = " << (s.temporal ? "true" : "false") << '\n'
      << "scale_by_reward_count = " << (s.scale_by_reward_count ? "true" : "false") << '\n'
      << "naive_mix = " << (s.naive_mix ? "true" : "false") << '\n'
      << "checkpoint_in = " << s.checkpoint_in << '\n'
      << "checkpoint_out = " << s.checkpoint_out << '\n'
      << "eval_samples = " << s.eval_samples << '\n'
      << "diversity_trees = " << s.diversity_trees << '\n'
      << "diversity_branch_factor = " << s.diversity_branch_factor << '\n'
      << "noise_table_steps = " << detail::join_nums(s.noise_table_steps) << '\n';
  return out.str();
}

// ============================================================
// Shared building blocks
// ============================================================

inline nn::MlpSpec model_spec(const Settings& s) {
  nn::MlpSpec spec;
  spec.input_dim = 2 + 1 + s.env.modes;
  spec.hidden_dims = s.hidden;
  spec.output_dim = 2;
  spec.activation = s.activation;
  return spec;
}

/** Reward rows in the configured order; every name maps to one closed form. */
inline std::function<std::vector<double>(const std::vector<double>&, int)> make_reward_fn(
    const Settings& s) {
  const envs::GaussMixEnv env = s.env;
  const envs::RewardParams p = s.reward_params;
  const std::vector<std::string> names = s.reward_names;
  return [env, p, names](const std::vector<double>& x, int c) {
    std::vector<double> row;
    row.reserve(names.size());
    for (const auto& name : names) {
      if (name == "target")
        row.push_back(envs::reward_target(env, p, x, c));
      else if (name == "ring")
        row.push_back(envs::reward_ring(p, x));
      else
        row.push_back(envs::reward_angle(env, p, x, c));
    }
    return row;
  };
}

/** Deterministic ODE sample for condition c from a drawn noise point. */
inline std::vector<double> ode_sample(const flow::VelocityModel& model, int c,
                                      const flow::TimeGrid& grid, rng::Rng& stream) {
  auto x = stream.gaussian_vec(model.data_dim());
  for (int j = grid.steps; j >= 1; --j) x = flow::ode_step(model, c, x, j, grid);
  return x;
}

/** Fraction of ODE samples landing within 3 data_std + 0.5 of their mode. */
inline double fraction_near_mode(const flow::VelocityModel& model, const envs::GaussMixEnv& env,
                                 int T, int samples_per_mode, rng::Rng stream) {
  const flow::TimeGrid grid(T);
  long near = 0, total = 0;
  for (int c = 0; c < env.modes; ++c) {
    const auto mu = envs::mode_center(env, c);
    for (int i = 0; i < samples_per_mode; ++i) {
      const auto x = ode_sample(model, c, grid, stream);
      const double dx = x[0] - mu[0], dy = x[1] - mu[1];
      if (std::sqrt(dx * dx + dy * dy) <= 3.0 * env.data_std + 0.5) ++near;
      ++total;
    }
  }
  return static_cast<double>(near) / static_cast<double>(total);
}

struct NoiseRow {
  int step;
  double t;
  double step_noise;  // sigma(t_j) * sqrt(dt): the injected per-step scale
};

/** Per-step noise magnitudes, top step first. Strictly decreasing in time. */
inline std::vector<NoiseRow> noise_rows(int T, const flow::NoiseSchedule& ns) {
  const flow::TimeGrid grid(T);
  std::vector<NoiseRow> rows;
  rows.reserve(static_cast<size_t>(T));
  for (int j = T; j >= 1; --j) {
    const double t = grid.t(j);
    rows.push_back({j, t, flow::sigma(ns, t) * std::sqrt(grid.dt(j))});
  }
  return rows;
}

namespace detail {

namespace fs = std::filesystem;

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("failed writing: " + path);
}

inline void prepare_out_dir(const std::string& out_dir, const Settings& s) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);
  write_text(join_path(out_dir, "config_resolved.txt"), settings_to_text(s));
}

inline void write_run_json(const std::string& out_dir, const nlohmann::json& summary) {
  write_text(join_path(out_dir, "run.json"), summary.dump(2) + "\n");
}

inline flow::VelocityModel load_model(const Settings& s) {
  if (s.checkpoint_in.empty())
    throw ConfigError("checkpoint_in is required for this run mode");
  auto [spec, params] = nn::load_params(s.checkpoint_in);
  if (spec.output_dim != 2 || spec.input_dim != 2 + 1 + s.env.modes)
    throw ShapeError("checkpoint does not match a 2-D model with " +
                     std::to_string(s.env.modes) + " conditions");
  return flow::VelocityModel{spec, std::move(params), s.env.modes};
}

struct Window {
  std::vector<double> first_mean;  // per reward column
  std::vector<double> last_mean;
  std::vector<double> rel_gain;
};

inline Window reward_windows(const std::vector<metrics::MetricRecord>& recs, long window) {
  const size_t M = recs.front().mean_reward.size();
  const size_t w = static_cast<size_t>(
      std::max(1L, std::min(window, static_cast<long>(recs.size()) / 2)));
  Window out;
  out.first_mean.assign(M, 0.0);
  out.last_mean.assign(M, 0.0);
  for (size_t i = 0; i < w; ++i)
    for (size_t m = 0; m < M; ++m) {
      out.first_mean[m] += recs[i].mean_reward[m] / static_cast<double>(w);
      out.last_mean[m] += recs[recs.size() - w + i].mean_reward[m] / static_cast<double>(w);
    }
  out.rel_gain.assign(M, 0.0);
  for (size_t m = 0; m < M; ++m)
    out.rel_gain[m] = (out.last_mean[m] - out.first_mean[m]) /
                      std::max(std::abs(out.first_mean[m]), 1e-12);
  return out;
}

}  // namespace detail

// ============================================================
// Run modes
// ============================================================

/**
 * Flow-matching pretraining on the mixture: regress the velocity network
 * onto straight-line interpolation targets, save the checkpoint, and score
 * sample quality by the fraction of 40-step ODE samples near their mode.
 */
inline nlohmann::json run_pretrain(const Settings& s, const std::string& out_dir) {
  detail::prepare_out_dir(out_dir, s);
  const auto spec = model_spec(s);
  rng::Rng master(s.seed);
  nn::ParamVector params = nn::mlp_init(spec, master.derive(1).seed());
  nn::AdamState adam;
  adam.lr = s.pretrain_lr;
  rng::Rng data = master.derive(2);

  std::ofstream log(detail::join_path(out_dir, "pretrain_log.jsonl"), std::ios::trunc);
  if (!log) throw IoError("cannot open pretrain log in " + out_dir);

  double final_loss = 0.0;
  for (int iter = 0; iter < s.pretrain_iters; ++iter) {
    // One interpolation sample per batch slot, conditions round-robin.
    std::vector<std::vector<double>> inputs, targets;
    inputs.reserve(static_cast<size_t>(s.pretrain_batch));
    for (int b = 0; b < s.pretrain_batch; ++b) {
      const int c = (iter * s.pretrain_batch + b) % s.env.modes;
      const auto x0 = envs::sample_data(s.env, c, data);
      const auto x1 = data.gaussian_vec(2);
      const double t = std::min(std::max(data.uniform(), 1e-3), 1.0 - 1e-3);
      inputs.push_back(flow::model_input(flow::interpolate(x0, x1, t), t, c, s.env.modes));
      targets.push_back({x1[0] - x0[0], x1[1] - x0[1]});
    }
    const auto grad = nn::grad_scalar(spec, params, [&](nn::GradTape& tape) {
      std::vector<nn::GradTape::Scalar> losses;
      losses.reserve(inputs.size());
      for (size_t b = 0; b < inputs.size(); ++b)
        losses.push_back(tape.squared_distance(tape.mlp(inputs[b]), targets[b]));
      return tape.mean(losses);
    });
    nn::adam_step(params, grad.gradient, adam);
    final_loss = grad.value;
    if (iter % 25 == 0 || iter + 1 == s.pretrain_iters)
      log << nlohmann::json{{"iteration", iter}, {"fm_loss", grad.value}}.dump() << '\n';
  }

  const std::string ckpt_name = s.checkpoint_out.empty() ? "model.ckpt" : s.checkpoint_out;
  const std::string ckpt = detail::join_path(out_dir, ckpt_name);
  nn::save_params(ckpt, spec, params);

  const flow::VelocityModel model{spec, params, s.env.modes};
  const double frac =
      fraction_near_mode(model, s.env, 40, std::max(50, s.eval_samples / s.env.modes),
                         master.derive(3));
  nlohmann::json summary{{"mode", "pretrain"},
                         {"final_fm_loss", final_loss},
                         {"fraction_near_mode", frac},
                         {"checkpoint", ckpt}};
  detail::write_run_json(out_dir, summary);
  return summary;
}

/**
 * Reward alignment from a pretrained checkpoint: tree rollouts, grouped
 * advantages, clipped-ratio ascent. Writes metrics.jsonl + metrics.csv, the
 * aligned checkpoint, and first/last reward windows in run.json.
 */
inline nlohmann::json run_align(const Settings& s, const std::string& out_dir) {
  detail::prepare_out_dir(out_dir, s);
  auto model = detail::load_model(s);
  rng::Rng master(s.seed);

  grpo::GrpoConfig cfg;
  cfg.time_steps = s.time_steps;
  cfg.schedule = config::parse_branch_schedule(s.branch_schedule, s.time_steps, s.root_factor);
  cfg.noise.noise_level = s.noise_level;
  cfg.grouping.weights = s.weights;
  cfg.grouping.eps_std = s.eps_std;
  cfg.grouping.temporal = s.temporal;
  cfg.grouping.scale_by_reward_count = s.scale_by_reward_count;
  cfg.clip_epsilon = s.clip_epsilon;
  cfg.kl_coef = s.kl_coef;
  cfg.trees_per_iter = s.trees_per_iter;
  cfg.conditions = s.env.modes;
  cfg.naive_mix = s.naive_mix;

  grpo::TrainState st(std::move(model), master.derive(3).seed(), s.learning_rate);
  const auto records = grpo::train(st, cfg, make_reward_fn(s), s.iterations);

  metrics::write_jsonl(detail::join_path(out_dir, "metrics.jsonl"), records);
  metrics::write_csv(detail::join_path(out_dir, "metrics.csv"), records);
  const std::string ckpt_name =
      s.checkpoint_out.empty() ? "model_aligned.ckpt" : s.checkpoint_out;
  const std::string ckpt = detail::join_path(out_dir, ckpt_name);
  nn::save_params(ckpt, st.model.spec, st.model.params);

  const auto win = detail::reward_windows(records, 20);
  nlohmann::json summary{{"mode", "align"},
                         {"iterations", s.iterations},
                         {"rewards", s.reward_names},
                         {"first_window_mean", win.first_mean},
                         {"last_window_mean", win.last_mean},
                         {"relative_gain", win.rel_gain},
                         {"velocity_evals", st.velocity_evals},
                         {"checkpoint", ckpt}};
  detail::write_run_json(out_dir, summary);
  return summary;
}

/** Sample quality of a checkpoint: ODE samples per condition, with rewards. */
inline nlohmann::json run_eval(const Settings& s, const std::string& out_dir) {
  detail::prepare_out_dir(out_dir, s);
  const auto model = detail::load_model(s);
  rng::Rng master(s.seed);
  const flow::TimeGrid grid(s.time_steps);

  nlohmann::json per_condition = nlohmann::json::array();
  long near_total = 0;
  for (int c = 0; c < s.env.modes; ++c) {
    rng::Rng stream = master.derive(100 + static_cast<uint64_t>(c));
    const auto mu = envs::mode_center(s.env, c);
    double dist_sum = 0.0;
    long near = 0;
    std::vector<double> reward_sum(3, 0.0);
    for (int i = 0; i < s.eval_samples; ++i) {
      const auto x = ode_sample(model, c, grid, stream);
      const double dx = x[0] - mu[0], dy = x[1] - mu[1];
      const double dist = std::sqrt(dx * dx + dy * dy);
      dist_sum += dist;
      if (dist <= 3.0 * s.env.data_std + 0.5) ++near;
      const auto r = envs::reward_vector(s.env, s.reward_params, x, c);
      for (size_t m = 0; m < 3; ++m) reward_sum[m] += r[m];
    }
    near_total += near;
    for (auto& v : reward_sum) v /= static_cast<double>(s.eval_samples);
    per_condition.push_back(
        {{"condition", c},
         {"mean_distance", dist_sum / static_cast<double>(s.eval_samples)},
         {"fraction_near", static_cast<double>(near) / static_cast<double>(s.eval_samples)},
         {"mean_rewards", reward_sum}});
  }
  nlohmann::json summary{
      {"mode", "eval"},
      {"time_steps", s.time_steps},
      {"per_condition", per_condition},
      {"overall_fraction_near",
       static_cast<double>(near_total) / static_cast<double>(s.eval_samples * s.env.modes)}};
  detail::write_run_json(out_dir, summary);
  return summary;
}

/**
 * Leaf diversity of one branch point placed near the noise end (target step
 * T-2) versus near the data end (target step 2), on paired tree streams.
 */
inline nlohmann::json run_diversity(const Settings& s, const std::string& out_dir) {
  detail::prepare_out_dir(out_dir, s);
  if (s.time_steps < 5)
    throw ConfigError("diversity comparison needs time_steps >= 5 to separate placements");
  const auto model = detail::load_model(s);
  rng::Rng master(s.seed);
  const flow::TimeGrid grid(s.time_steps);
  flow::NoiseSchedule ns;
  ns.noise_level = s.noise_level;

  auto measure = [&](int target_step) {
    rollout::BranchSchedule schedule;
    schedule.root_factor = 1;
    schedule.entries = {{target_step, s.diversity_branch_factor}};
    rng::Rng streams = master.derive(4);
    std::vector<double> values;
    for (int g = 0; g < s.diversity_trees; ++g) {
      const int c = g % s.env.modes;
      const auto tree = rollout::rollout_tree(model, c, schedule, grid, ns,
                                              streams.derive(static_cast<uint64_t>(g)), 2);
      values.push_back(rollout::leaf_diversity(tree));
    }
    return values;
  };

  const auto near_noise = measure(s.time_steps - 2);
  const auto near_data = measure(2);
  auto mean = [](const std::vector<double>& xs) {
    double m = 0.0;
    for (double v : xs) m += v;
    return m / static_cast<double>(xs.size());
  };
  nlohmann::json summary{{"mode", "diversity"},
                         {"trees", s.diversity_trees},
                         {"branch_factor", s.diversity_branch_factor},
                         {"branch_near_noise_mean", mean(near_noise)},
                         {"branch_near_data_mean", mean(near_data)},
                         {"branch_near_noise_values", near_noise},
                         {"branch_near_data_values", near_data}};
  detail::write_run_json(out_dir, summary);
  return summary;
}

/** Per-step injected-noise table for each configured step count. */
inline nlohmann::json run_noise_table(const Settings& s, const std::string& out_dir) {
  detail::prepare_out_dir(out_dir, s);
  flow::NoiseSchedule ns;
  ns.noise_level = s.noise_level;
  std::ostringstream csv;
  csv.precision(17);
  csv << "time_steps,step,t,step_noise\n";
  nlohmann::json tables = nlohmann::json::array();
  for (long T : s.noise_table_steps) {
    const auto rows = noise_rows(static_cast<int>(T), ns);
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : rows) {
      csv << T << ',' << r.step << ',' << r.t << ',' << r.step_noise << '\n';
      jrows.push_back({{"step", r.step}, {"t", r.t}, {"step_noise", r.step_noise}});
    }
    tables.push_back({{"time_steps", T}, {"rows", jrows}});
  }
  detail::write_text(detail::join_path(out_dir, "noise_table.csv"), csv.str());
  nlohmann::json summary{{"mode", "noise-table"}, {"tables", tables}};
  detail::write_run_json(out_dir, summary);
  return summary;
}

/**
 * Weight-sensitivity sweep on the three-reward stack: naive mixing with ring
 * weight 1, 4, 10, plus per-column grouping, all from the same checkpoint
 * and seed. One CSV row per configuration.
 */
inline nlohmann::json run_ablate(const Settings& s, const std::string& out_dir) {
  detail::prepare_out_dir(out_dir, s);
  const auto base_model = detail::load_model(s);
  rng::Rng master(s.seed);
  const uint64_t train_seed = master.derive(7).seed();

  Settings run = s;
  run.reward_names = {"target", "ring", "angle"};

  struct Row {
    std::string label;
    double w_ring;
    detail::Window win;
  };
  std::vector<Row> rows;
  auto sweep = [&](const std::string& label, double w_ring, bool naive) {
    grpo::GrpoConfig cfg;
    cfg.time_steps = run.time_steps;
    cfg.schedule =
        config::parse_branch_schedule(run.branch_schedule, run.time_steps, run.root_factor);
    cfg.noise.noise_level = run.noise_level;
    cfg.grouping.weights = {1.0, w_ring, 1.0};
    cfg.grouping.eps_std = run.eps_std;
    cfg.grouping.temporal = run.temporal;
    cfg.grouping.scale_by_reward_count = run.scale_by_reward_count;
    cfg.clip_epsilon = run.clip_epsilon;
    cfg.kl_coef = run.kl_coef;
    cfg.trees_per_iter = run.trees_per_iter;
    cfg.conditions = run.env.modes;
    cfg.naive_mix = naive;
    grpo::TrainState st(base_model, train_seed, run.learning_rate);
    const auto records = grpo::train(st, cfg, make_reward_fn(run), run.iterations);
    rows.push_back({label, w_ring, detail::reward_windows(records, 20)});
  };
  sweep("naive", 1.0, true);
  sweep("naive", 4.0, true);
  sweep("naive", 10.0, true);
  sweep("grouped", 1.0, false);

  std::ostringstream csv;
  csv.precision(17);
  csv << "mode,w_ring";
  for (const auto& name : run.reward_names)
    csv << ',' << name << "_first," << name << "_last," << name << "_gain";
  csv << '\n';
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& row : rows) {
    csv << row.label << ',' << row.w_ring;
    for (size_t m = 0; m < 3; ++m)
      csv << ',' << row.win.first_mean[m] << ',' << row.win.last_mean[m] << ','
          << row.win.rel_gain[m];
    csv << '\n';
    jrows.push_back({{"mode", row.label},
                     {"w_ring", row.w_ring},
                     {"first_window_mean", row.win.first_mean},
                     {"last_window_mean", row.win.last_mean},
                     {"relative_gain", row.win.rel_gain}});
  }
  detail::write_text(detail::join_path(out_dir, "ablate.csv"), csv.str());
  nlohmann::json summary{{"mode", "ablate"}, {"rows", jrows}};
  detail::write_run_json(out_dir, summary);
  return summary;
}

}  // namespace treeflow::harness
