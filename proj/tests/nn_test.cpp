/**
 * MLP substrate tests: parameter layout, forward evaluation, Gaussian
 * log-density, reverse-mode gradients vs. central finite differences,
 * clip/min subgradient conventions, Adam, and checkpoint round-trips.
 */

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "treeflow/nn.hpp"
#include "treeflow/rng.hpp"

using namespace treeflow;
using nn::Activation;
using nn::GradTape;
using nn::MlpSpec;
using nn::ParamVector;

namespace {

MlpSpec make_spec(int in, std::vector<int> hidden, int out,
                  Activation act = Activation::Tanh) {
  MlpSpec s;
  s.input_dim = in;
  s.hidden_dims = std::move(hidden);
  s.output_dim = out;
  s.activation = act;
  return s;
}

ParamVector random_params(const MlpSpec& spec, uint64_t seed) {
  rng::Rng r(seed);
  ParamVector p;
  p.values.resize(static_cast<size_t>(nn::param_count(spec)));
  for (auto& v : p.values) v = r.gaussian() * 0.5;
  return p;
}

}  // namespace

TEST_CASE("mlp: parameter layout arithmetic") {
  CHECK(nn::param_count(make_spec(1, {}, 1)) == 2);
  CHECK(nn::param_count(make_spec(2, {4}, 1)) == 17);
  CHECK(nn::param_count(make_spec(3, {5, 7}, 2)) == (3 + 1) * 5 + (5 + 1) * 7 + (7 + 1) * 2);
  CHECK_THROWS_AS(nn::validate_spec(make_spec(0, {}, 1)), ConfigError);
  CHECK_THROWS_AS(nn::validate_spec(make_spec(1, {0}, 1)), ConfigError);
}

TEST_CASE("mlp: init is deterministic, zero-bias, fan-in scaled") {
  const auto spec = make_spec(4, {16}, 3);
  const auto a = nn::mlp_init(spec, 7);
  const auto b = nn::mlp_init(spec, 7);
  CHECK(a.values == b.values);
  const auto c = nn::mlp_init(spec, 8);
  CHECK(a.values != c.values);

  // First layer: 4*16 weights then 16 zero biases.
  for (int i = 0; i < 16; ++i) CHECK(a.values[static_cast<size_t>(4 * 16 + i)] == 0.0);
  // Weight magnitude consistent with the 1/sqrt(fan_in) scale.
  std::vector<double> w(a.values.begin(), a.values.begin() + 4 * 16);
  const double sd = std::sqrt(oracles::var_of(w));
  CHECK(sd > 0.25);  // 1/sqrt(4) = 0.5 up to sampling noise
  CHECK(sd < 0.75);
}

TEST_CASE("mlp: forward matches hand-computed affine maps") {
  // 1 -> 1 linear: w=2, b=1, input [3] -> [7].
  const auto spec = make_spec(1, {}, 1);
  ParamVector p;
  p.values = {2.0, 1.0};
  CHECK(nn::mlp_forward(spec, p, {3.0})[0] == doctest::Approx(7.0));

  // Zero parameters: output identically zero.
  const auto spec2 = make_spec(3, {5}, 2);
  ParamVector zeros;
  zeros.values.assign(static_cast<size_t>(nn::param_count(spec2)), 0.0);
  for (double v : nn::mlp_forward(spec2, zeros, {1.0, -2.0, 3.0})) CHECK(v == 0.0);

  // tanh(0) = 0 propagates.
  const auto spec3 = make_spec(1, {1}, 1);
  ParamVector ones;
  ones.values = {1.0, 0.0, 1.0, 0.0};  // w1, b1, w2, b2
  CHECK(nn::mlp_forward(spec3, ones, {0.0})[0] == doctest::Approx(0.0));

  // Relu kills the negative pre-activation.
  const auto spec4 = make_spec(1, {1}, 1, Activation::Relu);
  CHECK(nn::mlp_forward(spec4, ones, {-2.0})[0] == doctest::Approx(0.0));
  CHECK(nn::mlp_forward(spec4, ones, {2.0})[0] == doctest::Approx(2.0));
}

TEST_CASE("mlp: forward is pure and shape-checked") {
  const auto spec = make_spec(3, {8, 8}, 2);
  const auto p = random_params(spec, 99);
  const std::vector<double> in = {0.3, -1.2, 0.8};
  const auto y1 = nn::mlp_forward(spec, p, in);
  const auto y2 = nn::mlp_forward(spec, p, in);
  CHECK(y1 == y2);
  CHECK(y1.size() == 2);
  CHECK_THROWS_AS(nn::mlp_forward(spec, p, {1.0}), ShapeError);
  ParamVector bad;
  bad.values = {1.0};
  CHECK_THROWS_AS(nn::mlp_forward(spec, bad, in), ShapeError);
}

TEST_CASE("gaussian_log_density: hand values and invariances") {
  // 1-D, x = mean, scale 1: -0.5 log(2 pi).
  CHECK(nn::gaussian_log_density({0.0}, {0.0}, 1.0) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  // Translation invariance.
  const double base = nn::gaussian_log_density({0.4, -0.2}, {0.1, 0.3}, 0.7);
  const double shifted = nn::gaussian_log_density({10.4, 9.8}, {10.1, 10.3}, 0.7);
  CHECK(base == doctest::Approx(shifted).epsilon(1e-12));
  // Additivity across coordinates.
  const double d2 = nn::gaussian_log_density({1.0, 2.0}, {0.0, 0.0}, 0.5);
  const double d1a = nn::gaussian_log_density({1.0}, {0.0}, 0.5);
  const double d1b = nn::gaussian_log_density({2.0}, {0.0}, 0.5);
  CHECK(d2 == doctest::Approx(d1a + d1b).epsilon(1e-12));
  CHECK_THROWS_AS(nn::gaussian_log_density({0.0}, {0.0}, 0.0), ConfigError);
  CHECK_THROWS_AS(nn::gaussian_log_density({0.0}, {0.0, 1.0}, 1.0), ShapeError);
}

TEST_CASE("gaussian_log_density: density normalizes (Monte Carlo)") {
  // E[exp(logp + x^2/2 + 0.5 log 2pi)] under N(0,1) should be 1 when the
  // density under test is also N(0,1); sanity-checks the constant term.
  rng::Rng r(5);
  double acc = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double x = r.gaussian();
    const double logp = nn::gaussian_log_density({x}, {0.0}, 1.0);
    acc += std::exp(logp + 0.5 * x * x + 0.5 * std::log(2.0 * std::numbers::pi));
  }
  CHECK(acc / n == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("grad_scalar: analytic identities") {
  const auto spec = make_spec(2, {3}, 2);
  const auto p = random_params(spec, 3);

  SUBCASE("loss = ||params||^2 / 2 has gradient = params, bitwise") {
    const auto res = nn::grad_scalar(spec, p, [](GradTape& t) {
      return t.mul_const(t.param_squared_norm(), 0.5);
    });
    REQUIRE(res.gradient.size() == p.values.size());
    for (size_t i = 0; i < p.values.size(); ++i) CHECK(res.gradient[i] == p.values[i]);
  }

  SUBCASE("constant loss has zero gradient") {
    const auto res = nn::grad_scalar(spec, p, [](GradTape& t) { return t.constant(3.5); });
    CHECK(res.value == 3.5);
    for (double g : res.gradient) CHECK(g == 0.0);
  }
}

namespace {

// Builds the same loss from raw forward calls for finite differencing.
double forward_sq_loss(const MlpSpec& spec, const std::vector<double>& theta,
                       const std::vector<double>& in, const std::vector<double>& target) {
  ParamVector p;
  p.values = theta;
  const auto y = nn::mlp_forward(spec, p, in);
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) acc += (y[i] - target[i]) * (y[i] - target[i]);
  return acc;
}

void check_gradient_vs_fd(const MlpSpec& spec, const ParamVector& p,
                          const std::function<GradTape::Scalar(GradTape&)>& build,
                          const std::function<double(const std::vector<double>&)>& f,
                          uint64_t seed) {
  const auto res = nn::grad_scalar(spec, p, build);
  rng::Rng pick(seed);
  const size_t n = p.values.size();
  for (int k = 0; k < 32; ++k) {
    const size_t i = pick.next_u64() % n;
    const double fd = oracles::fd_partial(f, p.values, i);
    CHECK(oracles::rel_err(res.gradient[i], fd) < 1e-4);
  }
}

}  // namespace

TEST_CASE("grad_scalar: matches central finite differences across loss forms") {
  for (uint64_t trial = 0; trial < 5; ++trial) {
    const auto act = trial % 2 == 0 ? Activation::Tanh : Activation::Relu;
    const auto spec = make_spec(3, {6, 5}, 2, act);
    const auto p = random_params(spec, 100 + trial);
    rng::Rng r(200 + trial);
    const std::vector<double> in = r.gaussian_vec(3);
    const std::vector<double> target = r.gaussian_vec(2);
    const std::vector<double> obs = r.gaussian_vec(2);
    const double scale = 0.6, slope = -0.35, off = 0.2;

    SUBCASE("squared distance to a target") {
      check_gradient_vs_fd(
          spec, p,
          [&](GradTape& t) { return t.squared_distance(t.mlp(in), target); },
          [&](const std::vector<double>& th) { return forward_sq_loss(spec, th, in, target); },
          300 + trial);
    }

    SUBCASE("Gaussian log-density of an affine-mapped output") {
      auto fwd_mean = [&](const std::vector<double>& th) {
        ParamVector q;
        q.values = th;
        auto y = nn::mlp_forward(spec, q, in);
        for (auto& v : y) v = off + slope * v;
        return y;
      };
      check_gradient_vs_fd(
          spec, p,
          [&](GradTape& t) {
            auto mean = t.affine_map(
                t.mlp(in), [&](int, double v) { return off + slope * v; }, slope);
            return t.gaussian_logp(mean, obs, scale);
          },
          [&](const std::vector<double>& th) {
            return nn::gaussian_log_density(obs, fwd_mean(th), scale);
          },
          400 + trial);
    }

    SUBCASE("clipped-ratio objective shape") {
      // min(ratio * A, clip(ratio, 1 - e, 1 + e) * A) with ratio = exp(logp - logp_ref).
      const double logp_ref = nn::gaussian_log_density(obs, {0.1, -0.2}, scale);
      const double adv = trial % 2 == 0 ? 0.8 : -1.3;
      const double eps = 0.2;
      auto build = [&](GradTape& t) {
        auto mean = t.affine_map(
            t.mlp(in), [&](int, double v) { return off + slope * v; }, slope);
        auto ratio = t.exp(t.add_const(t.gaussian_logp(mean, obs, scale), -logp_ref));
        auto unclipped = t.mul_const(ratio, adv);
        auto clipped = t.mul_const(t.clip(ratio, 1.0 - eps, 1.0 + eps), adv);
        return t.min(unclipped, clipped);
      };
      auto f = [&](const std::vector<double>& th) {
        ParamVector q;
        q.values = th;
        auto y = nn::mlp_forward(spec, q, in);
        for (auto& v : y) v = off + slope * v;
        const double ratio = std::exp(nn::gaussian_log_density(obs, y, scale) - logp_ref);
        const double cl = std::min(std::max(ratio, 1.0 - eps), 1.0 + eps);
        return std::min(ratio * adv, cl * adv);
      };
      check_gradient_vs_fd(spec, p, build, f, 500 + trial);
    }

    SUBCASE("batch mean plus parameter norm") {
      rng::Rng r2(600 + trial);
      std::vector<std::vector<double>> ins, targets;
      for (int i = 0; i < 4; ++i) {
        ins.push_back(r2.gaussian_vec(3));
        targets.push_back(r2.gaussian_vec(2));
      }
      auto build = [&](GradTape& t) {
        std::vector<GradTape::Scalar> losses;
        for (int i = 0; i < 4; ++i)
          losses.push_back(t.squared_distance(t.mlp(ins[static_cast<size_t>(i)]),
                                              targets[static_cast<size_t>(i)]));
        return t.add(t.mean(losses), t.mul_const(t.param_squared_norm(), 0.01));
      };
      auto f = [&](const std::vector<double>& th) {
        double acc = 0.0;
        for (int i = 0; i < 4; ++i)
          acc += forward_sq_loss(spec, th, ins[static_cast<size_t>(i)],
                                 targets[static_cast<size_t>(i)]);
        double norm = 0.0;
        for (double v : th) norm += v * v;
        return acc / 4.0 + 0.01 * norm;
      };
      check_gradient_vs_fd(spec, p, build, f, 700 + trial);
    }
  }
}

TEST_CASE("tape: clip boundary counts as pass-through") {
  // Scalar s = squared_distance(mlp(x), 0) built so s sits exactly on a clip edge.
  const auto spec = make_spec(1, {}, 1);
  ParamVector p;
  p.values = {1.0, 0.0};  // output = input
  auto grad_at = [&](double hi) {
    return nn::grad_scalar(spec, p, [&](GradTape& t) {
      auto s = t.squared_distance(t.mlp({1.0}), {0.0});  // s = 1 exactly
      return t.clip(s, 0.0, hi);
    });
  };
  // hi = 1: value on the boundary; derivative passes through: ds/dw = 2, ds/db = 2.
  const auto on_edge = grad_at(1.0);
  CHECK(on_edge.gradient[0] == doctest::Approx(2.0));
  CHECK(on_edge.gradient[1] == doctest::Approx(2.0));
  // hi = 0.5: strictly clipped; zero gradient.
  const auto clipped = grad_at(0.5);
  CHECK(clipped.gradient[0] == 0.0);
  CHECK(clipped.gradient[1] == 0.0);
}

TEST_CASE("tape: min ties prefer the first argument") {
  const auto spec = make_spec(1, {}, 1);
  ParamVector p;
  p.values = {1.0, 0.0};
  // s depends on params and equals 1; c is a constant 1: exact tie.
  const auto first = nn::grad_scalar(spec, p, [&](GradTape& t) {
    auto s = t.squared_distance(t.mlp({1.0}), {0.0});
    return t.min(s, t.constant(1.0));
  });
  CHECK(first.gradient[0] == doctest::Approx(2.0));  // flows through s
  const auto second = nn::grad_scalar(spec, p, [&](GradTape& t) {
    auto s = t.squared_distance(t.mlp({1.0}), {0.0});
    return t.min(t.constant(1.0), s);
  });
  CHECK(second.gradient[0] == 0.0);  // constant wins the tie
}

TEST_CASE("tape: non-finite intermediates are reported with the op name") {
  const auto spec = make_spec(1, {}, 1);
  ParamVector p;
  p.values = {1.0, 0.0};
  CHECK_THROWS_AS(nn::grad_scalar(spec, p,
                                  [&](GradTape& t) {
                                    return t.exp(t.constant(1e9));  // overflows to inf
                                  }),
                  NumericError);
}

TEST_CASE("adam: zero gradient is a no-op apart from the step counter") {
  const auto spec = make_spec(2, {3}, 1);
  auto p = nn::mlp_init(spec, 1);
  const auto before = p.values;
  nn::AdamState st;
  st.lr = 0.1;
  adam_step(p, std::vector<double>(p.values.size(), 0.0), st);
  CHECK(p.values == before);
  CHECK(st.step_count == 1);
  for (double m : st.first_moment) CHECK(m == 0.0);
  for (double v : st.second_moment) CHECK(v == 0.0);
}

TEST_CASE("adam: first step moves each coordinate by ~lr * sign(grad)") {
  ParamVector p;
  p.values = {0.0, 0.0};
  nn::AdamState st;
  st.lr = 0.1;
  adam_step(p, {3.0, -2.0}, st);
  CHECK(p.values[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p.values[1] == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("adam: deterministic and guarded") {
  ParamVector a, b;
  a.values = {0.5, -0.5, 1.0};
  b.values = a.values;
  nn::AdamState sa, sb;
  const std::vector<double> g = {0.1, 0.2, -0.3};
  for (int i = 0; i < 5; ++i) {
    adam_step(a, g, sa);
    adam_step(b, g, sb);
  }
  CHECK(a.values == b.values);
  CHECK_THROWS_AS(adam_step(a, {1.0}, sa), ShapeError);
  nn::AdamState fresh;
  CHECK_THROWS_AS(
      adam_step(a, std::vector<double>{0.0, 0.0, std::numeric_limits<double>::quiet_NaN()}, fresh),
      NumericError);
}

TEST_CASE("checkpoint: round-trip reproduces forward outputs bit-for-bit") {
  const auto spec = make_spec(5, {8, 4}, 2, Activation::Relu);
  const auto p = random_params(spec, 42);
  const std::string path = "nn_test_checkpoint.bin";
  nn::save_params(path, spec, p);
  const auto [spec2, p2] = nn::load_params(path);
  CHECK(spec2.input_dim == spec.input_dim);
  CHECK(spec2.hidden_dims == spec.hidden_dims);
  CHECK(spec2.output_dim == spec.output_dim);
  CHECK(spec2.activation == spec.activation);
  CHECK(p2.values == p.values);
  rng::Rng r(77);
  const auto in = r.gaussian_vec(5);
  CHECK(nn::mlp_forward(spec, p, in) == nn::mlp_forward(spec2, p2, in));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint: io failures are categorized") {
  CHECK_THROWS_AS(nn::load_params("does_not_exist.bin"), IoError);
  const std::string path = "nn_test_badmagic.bin";
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTAMAGIC and then some bytes";
  }
  CHECK_THROWS_AS(nn::load_params(path), IoError);
  std::remove(path.c_str());
}
