#pragma once
/**
 * Analytic toy environment: a 2-D Gaussian mixture with four symmetric modes
 * and three closed-form rewards probing different aspects of a sample.
 *
 *   - target: closeness to the conditioning mode's center, peak 1.
 *   - ring: closeness of the radius to a preferred circle, peak ring_scale.
 *     The default scale (50) dwarfs the other rewards by design; mixing
 *     rewards before normalization lets this one dominate.
 *   - angle: alignment of the sample's direction with the mode's direction,
 *     peak amplitude, 0 when pointing the opposite way.
 *
 * Everything is deterministic and differentiable-free (rewards only score
 * final samples), so expected behaviors can be computed by hand.
 */

#include <cmath>
#include <numbers>
#include <vector>

#include "treeflow/errors.hpp"
#include "treeflow/rng.hpp"

namespace treeflow::envs {

// ============================================================
// Data distribution
// ============================================================

/** Four Gaussian modes at (+-2, +-2) with per-coordinate std data_std. */
struct GaussMixEnv {
  int modes = 4;
  double data_std = 0.3;
};

inline void validate_env(const GaussMixEnv& env) {
  if (env.modes < 1) throw ConfigError("env: modes must be >= 1");
  if (!(env.data_std > 0.0)) throw ConfigError("env: data_std must be > 0");
}

inline std::vector<double> mode_center(const GaussMixEnv& env, int c) {
  validate_env(env);
  if (c < 0 || c >= env.modes) throw ConfigError("env: condition out of range");
  if (env.modes == 4) {
    static const double table[4][2] = {{2.0, 2.0}, {-2.0, 2.0}, {-2.0, -2.0}, {2.0, -2.0}};
    return {table[c][0], table[c][1]};
  }
  // Other mode counts: evenly spaced on the same circle.
  const double radius = 2.0 * std::sqrt(2.0);
  const double angle = std::numbers::pi / 4.0 +
                       2.0 * std::numbers::pi * static_cast<double>(c) / env.modes;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

inline std::vector<double> sample_data(const GaussMixEnv& env, int c, rng::Rng& stream) {
  auto x = mode_center(env, c);
  for (auto& v : x) v += env.data_std * stream.gaussian();
  return x;
}

// ============================================================
// Rewards
// ============================================================

struct RewardParams {
  double target_std = 0.5;      // width of the mode-proximity reward
  double ring_radius = 4.0;     // preferred radius
  double ring_std = 1.2;        // width of the radial band
  double ring_scale = 50.0;     // deliberately large peak value
  double angle_amplitude = 1.0; // peak of the directional reward
};

inline void validate_rewards(const RewardParams& p) {
  if (!(p.target_std > 0.0) || !(p.ring_std > 0.0))
    throw ConfigError("rewards: widths must be > 0");
  if (!(p.ring_scale > 0.0) || !(p.angle_amplitude > 0.0))
    throw ConfigError("rewards: scales must be > 0");
  if (!(p.ring_radius >= 0.0)) throw ConfigError("rewards: ring_radius must be >= 0");
}

inline void check_point(const std::vector<double>& x) {
  if (x.size() != 2) throw ShapeError("rewards: expected a 2-D sample");
  for (double v : x)
    if (!std::isfinite(v)) throw NumericError("rewards: non-finite sample");
}

/** exp(-||x - center_c||^2 / (2 target_std^2)), peak 1 at the mode center. */
inline double reward_target(const GaussMixEnv& env, const RewardParams& p,
                            const std::vector<double>& x, int c) {
  check_point(x);
  validate_rewards(p);
  const auto mu = mode_center(env, c);
  double sq = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mu[i];
    sq += d * d;
  }
  return std::exp(-sq / (2.0 * p.target_std * p.target_std));
}

/** ring_scale * exp(-(||x|| - ring_radius)^2 / (2 ring_std^2)). */
inline double reward_ring(const RewardParams& p, const std::vector<double>& x) {
  check_point(x);
  validate_rewards(p);
  const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
  const double d = r - p.ring_radius;
  return p.ring_scale * std::exp(-d * d / (2.0 * p.ring_std * p.ring_std));
}

/**
 * amplitude * (1 + cos(angle(x) - angle(center_c))) / 2: peak when x points
 * at the mode, 0 when opposite, amplitude/2 at the undirected origin.
 */
inline double reward_angle(const GaussMixEnv& env, const RewardParams& p,
                           const std::vector<double>& x, int c) {
  check_point(x);
  validate_rewards(p);
  if (x[0] == 0.0 && x[1] == 0.0) return 0.5 * p.angle_amplitude;
  const auto mu = mode_center(env, c);
  const double theta = std::atan2(x[1], x[0]);
  const double phi = std::atan2(mu[1], mu[0]);
  return p.angle_amplitude * 0.5 * (1.0 + std::cos(theta - phi));
}

/** The three rewards as one row: {target, ring, angle}. */
inline std::vector<double> reward_vector(const GaussMixEnv& env, const RewardParams& p,
                                         const std::vector<double>& x, int c) {
  return {reward_target(env, p, x, c), reward_ring(p, x), reward_angle(env, p, x, c)};
}

}  // namespace treeflow::envs
