/**
 * Environment tests: mode geometry, data sampling statistics, closed-form
 * reward values at hand-picked points, conventions at degenerate inputs, and
 * the deliberate scale gap between the ring reward and the bounded ones.
 */

#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "treeflow/envs.hpp"

using namespace treeflow;

TEST_CASE("mode_center: four modes at (+-2, +-2)") {
  envs::GaussMixEnv env;
  CHECK(envs::mode_center(env, 0) == std::vector<double>{2.0, 2.0});
  CHECK(envs::mode_center(env, 1) == std::vector<double>{-2.0, 2.0});
  CHECK(envs::mode_center(env, 2) == std::vector<double>{-2.0, -2.0});
  CHECK(envs::mode_center(env, 3) == std::vector<double>{2.0, -2.0});
  CHECK_THROWS_AS(envs::mode_center(env, 4), ConfigError);
  CHECK_THROWS_AS(envs::mode_center(env, -1), ConfigError);
}

TEST_CASE("sample_data: matches the mode's mean and variance") {
  envs::GaussMixEnv env;
  rng::Rng stream(404);
  const int n = 4000;
  std::vector<double> xs, ys;
  for (int i = 0; i < n; ++i) {
    const auto p = envs::sample_data(env, 1, stream);
    xs.push_back(p[0]);
    ys.push_back(p[1]);
  }
  CHECK(std::abs(oracles::mean_of(xs) - (-2.0)) < 0.05);
  CHECK(std::abs(oracles::mean_of(ys) - 2.0) < 0.05);
  CHECK(std::abs(oracles::var_of(xs) - 0.09) < 0.01);
  CHECK(std::abs(oracles::var_of(ys) - 0.09) < 0.01);
}

TEST_CASE("reward_target: peak 1 at the center, exp(-1/2) one width away") {
  envs::GaussMixEnv env;
  envs::RewardParams p;
  CHECK(envs::reward_target(env, p, {2.0, 2.0}, 0) == 1.0);
  CHECK(envs::reward_target(env, p, {2.5, 2.0}, 0) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(envs::reward_target(env, p, {2.0, 1.5}, 0) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  // Far away the reward is negligible but never negative.
  CHECK(envs::reward_target(env, p, {-2.0, -2.0}, 0) < 1e-10);
  CHECK(envs::reward_target(env, p, {-2.0, -2.0}, 0) > 0.0);
}

TEST_CASE("reward_ring: peak scale on the circle, decays off it") {
  envs::RewardParams p;
  CHECK(envs::reward_ring(p, {4.0, 0.0}) == 50.0);
  CHECK(envs::reward_ring(p, {0.0, -4.0}) == 50.0);
  CHECK(envs::reward_ring(p, {4.0 + 1.2, 0.0}) ==
        doctest::Approx(50.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(envs::reward_ring(p, {0.0, 0.0}) ==
        doctest::Approx(50.0 * std::exp(-16.0 / 2.88)).epsilon(1e-12));
  // The mode circle (radius 2 sqrt 2) sits well inside the reward band.
  const double at_modes = envs::reward_ring(p, {2.0, 2.0});
  CHECK(at_modes < 50.0 * 0.7);
  CHECK(at_modes > 50.0 * 0.5);
}

TEST_CASE("reward_angle: alignment conventions") {
  envs::GaussMixEnv env;
  envs::RewardParams p;
  // Pointing at mode 0 (45 degrees): full amplitude at any radius.
  CHECK(envs::reward_angle(env, p, {1.0, 1.0}, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(envs::reward_angle(env, p, {5.0, 5.0}, 0) == doctest::Approx(1.0).epsilon(1e-12));
  // Opposite direction: zero.
  CHECK(envs::reward_angle(env, p, {-1.0, -1.0}, 0) == doctest::Approx(0.0).epsilon(1e-12));
  // Perpendicular: half.
  CHECK(envs::reward_angle(env, p, {1.0, -1.0}, 0) == doctest::Approx(0.5).epsilon(1e-12));
  // The undirected origin scores half by convention.
  CHECK(envs::reward_angle(env, p, {0.0, 0.0}, 0) == 0.5);
}

TEST_CASE("reward_vector: composition at a mode center with the ring moved onto it") {
  envs::GaussMixEnv env;
  envs::RewardParams p;
  p.ring_radius = 2.0 * std::sqrt(2.0);
  const auto r = envs::reward_vector(env, p, envs::mode_center(env, 0), 0);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 50.0);
  CHECK(r[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reward scales: the ring dwarfs the bounded rewards by >= 25x") {
  envs::GaussMixEnv env;
  envs::RewardParams p;
  double max_ring = 0.0, max_other = 0.0;
  for (double x = -5.0; x <= 5.0; x += 0.25)
    for (double y = -5.0; y <= 5.0; y += 0.25)
      for (int c = 0; c < 4; ++c) {
        max_ring = std::max(max_ring, envs::reward_ring(p, {x, y}));
        max_other = std::max(max_other, envs::reward_target(env, p, {x, y}, c));
        max_other = std::max(max_other, envs::reward_angle(env, p, {x, y}, c));
      }
  CHECK(max_ring >= 25.0 * max_other);
}

TEST_CASE("validation: malformed points and parameters") {
  envs::GaussMixEnv env;
  envs::RewardParams p;
  CHECK_THROWS_AS(envs::reward_ring(p, {1.0}), ShapeError);
  CHECK_THROWS_AS(envs::reward_target(env, p, {1.0, 2.0, 3.0}, 0), ShapeError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(envs::reward_ring(p, {nan, 0.0}), NumericError);
  envs::RewardParams bad = p;
  bad.target_std = 0.0;
  CHECK_THROWS_AS(envs::reward_target(env, bad, {0.0, 0.0}, 0), ConfigError);
  envs::GaussMixEnv bad_env;
  bad_env.data_std = -1.0;
  rng::Rng r(1);
  CHECK_THROWS_AS(envs::sample_data(bad_env, 0, r), ConfigError);
}
