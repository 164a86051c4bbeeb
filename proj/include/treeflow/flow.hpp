#pragma once

/**
 * Rectified-flow core: interpolation, flow-matching loss, time grids, the
 * noise schedule, the score identity, ODE/SDE integration steps, and Gaussian
 * transition densities.
 *
 * Conventions:
 * - Denoising runs j = T, T-1, ..., 1, each step producing x_{j-1} from x_j;
 *   t_j = j/T, so t=1 is pure noise and t=0 is data.
 * - The coefficients of step j (velocity input time, sigma, drift correction)
 *   are evaluated at tau_j = min(t_j, 1 - dt_j). This only changes the j = T
 *   step, which reuses the previous grid time: evaluating sigma at t = 1
 *   (clipped to 1 - t_clip) puts a ~sigma^2/t_clip drift on the first step and
 *   destroys the marginals the SDE is supposed to preserve. Left-endpoint
 *   coefficient evaluation keeps the Euler-Maruyama weak order intact.
 * - sigma() itself keeps the raw [t_clip, 1 - t_clip] clipping; analytic
 *   noise tables therefore still report the (huge) t = 1 entry.
 *
 * Exactness contracts relied on elsewhere:
 * - transition_mean is assembled from transition_mean_coord so the training
 *   tape can recompute means bitwise-identically (shared per-coordinate
 *   kernel + analytic slope).
 * - A Transition's logp_old is produced by transition_logprob on the stored
 *   mean and noise scale, so recomputing it from the same inputs is exact.
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <utility>
#include <vector>

#include "treeflow/errors.hpp"
#include "treeflow/nn.hpp"
#include "treeflow/rng.hpp"

namespace treeflow::flow {

// ============================================================================
// Time grid and noise schedule
// ============================================================================

// Uniform grid t_j = j/T for j = 0..T.
struct TimeGrid {
  int steps;

  explicit TimeGrid(int T) : steps(T) {
    if (T < 1) throw ConfigError("TimeGrid: steps must be >= 1");
  }

  double t(int j) const { return static_cast<double>(j) / steps; }
  double dt(int) const { return 1.0 / steps; }

  // Coefficient-evaluation time for the step producing x_{j-1} (see header).
  double step_time(int j) const { return std::min(t(j), 1.0 - dt(j)); }
};

struct NoiseSchedule {
  double noise_level = 0.7;  // a in sigma(t) = a sqrt(t / (1 - t))
  double t_clip = 1e-4;
};

inline double sigma(const NoiseSchedule& ns, double t) {
  const double tc = std::clamp(t, ns.t_clip, 1.0 - ns.t_clip);
  return ns.noise_level * std::sqrt(tc / (1.0 - tc));
}

// ============================================================================
// Velocity fields
// ============================================================================

template <typename F>
concept VelocityField = requires(const F& f, const std::vector<double>& x, double t, int c) {
  { f(x, t, c) } -> std::same_as<std::vector<double>>;
};

// Network input layout: [x, t, one_hot(c)]; with cond_dim = 0 the one-hot
// block is absent and c is ignored.
inline std::vector<double> model_input(const std::vector<double>& x, double t, int c,
                                       int cond_dim) {
  if (cond_dim > 0 && (c < 0 || c >= cond_dim))
    throw ConfigError("model_input: condition id out of range");
  std::vector<double> in;
  in.reserve(x.size() + 1 + static_cast<size_t>(cond_dim));
  in.insert(in.end(), x.begin(), x.end());
  in.push_back(t);
  for (int i = 0; i < cond_dim; ++i) in.push_back(i == c ? 1.0 : 0.0);
  return in;
}

// The learned conditional velocity field v(x, t, c).
struct VelocityModel {
  nn::MlpSpec spec;
  nn::ParamVector params;
  int cond_dim = 0;

  int data_dim() const { return spec.output_dim; }

  std::vector<double> operator()(const std::vector<double>& x, double t, int c) const {
    return nn::mlp_forward(spec, params, model_input(x, t, c, cond_dim));
  }
};

inline void validate_model(const VelocityModel& m) {
  nn::validate_spec(m.spec);
  if (m.cond_dim < 0) throw ConfigError("VelocityModel: cond_dim must be >= 0");
  if (m.spec.input_dim != m.spec.output_dim + 1 + m.cond_dim)
    throw ConfigError("VelocityModel: input_dim must equal data_dim + 1 + cond_dim");
  if (static_cast<int>(m.params.values.size()) != nn::param_count(m.spec))
    throw ShapeError("VelocityModel: params length does not match spec layout");
}

// ============================================================================
// Interpolation and flow-matching loss
// ============================================================================

inline std::vector<double> interpolate(const std::vector<double>& x0,
                                       const std::vector<double>& x1, double t) {
  if (x0.size() != x1.size()) throw ShapeError("interpolate: dimension mismatch");
  if (t < 0.0 || t > 1.0) throw ConfigError("interpolate: t must lie in [0, 1]");
  std::vector<double> out(x0.size());
  for (size_t i = 0; i < x0.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
  return out;
}

struct FlowSample {
  std::vector<double> x0;  // data
  std::vector<double> x1;  // noise
  double t = 0.0;
  int c = 0;
};

// Mean squared error between the field and the target velocity x1 - x0,
// evaluated at the interpolated point.
template <typename F>
  requires VelocityField<F>
inline double fm_loss(const F& model, const std::vector<FlowSample>& batch) {
  if (batch.empty()) throw ConfigError("fm_loss: empty batch");
  double acc = 0.0;
  for (const auto& s : batch) {
    const auto xt = interpolate(s.x0, s.x1, s.t);
    const auto v = model(xt, s.t, s.c);
    if (v.size() != s.x0.size()) throw ShapeError("fm_loss: velocity dimension mismatch");
    for (size_t i = 0; i < v.size(); ++i) {
      const double d = v[i] - (s.x1[i] - s.x0[i]);
      acc += d * d;
    }
  }
  return acc / static_cast<double>(batch.size());
}

// ============================================================================
// Score identity
// ============================================================================

// score(x, t, v) = -x/t - ((1 - t)/t) v, with t clipped away from {0, 1}.
inline std::vector<double> score(const std::vector<double>& x, double t,
                                 const std::vector<double>& v, double t_clip = 1e-4) {
  if (x.size() != v.size()) throw ShapeError("score: dimension mismatch");
  const double tc = std::clamp(t, t_clip, 1.0 - t_clip);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = -x[i] / tc - ((1.0 - tc) / tc) * v[i];
  return out;
}

// ============================================================================
// Transition mean (shared drift kernel)
// ============================================================================

// Precomputed coefficients of one reverse-SDE step.
struct TransitionCoef {
  double tc;    // clipped evaluation time
  double dt;
  double coef;  // sigma(t)^2 / (2 t)
};

inline TransitionCoef transition_coef(double t, double dt, const NoiseSchedule& ns) {
  const double tc = std::clamp(t, ns.t_clip, 1.0 - ns.t_clip);
  const double s = sigma(ns, t);
  return {tc, dt, s * s / (2.0 * tc)};
}

// Per-coordinate mean: x - [v + coef (x + (1 - t) v)] dt.
// The training tape calls this exact kernel so recomputed means are bitwise
// equal to rollout-time means.
inline double transition_mean_coord(double x, double v, const TransitionCoef& k) {
  return x - (v + k.coef * (x + (1.0 - k.tc) * v)) * k.dt;
}

// d transition_mean_coord / d v: the analytic slope used by the tape.
inline double transition_mean_slope(const TransitionCoef& k) {
  return -(1.0 + k.coef * (1.0 - k.tc)) * k.dt;
}

inline std::vector<double> transition_mean(const std::vector<double>& x,
                                           const std::vector<double>& v, double t, double dt,
                                           const NoiseSchedule& ns) {
  if (x.size() != v.size()) throw ShapeError("transition_mean: dimension mismatch");
  if (dt <= 0.0) throw ConfigError("transition_mean: dt must be positive");
  const TransitionCoef k = transition_coef(t, dt, ns);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = transition_mean_coord(x[i], v[i], k);
  return out;
}

// ============================================================================
// Transitions and densities
// ============================================================================

// One stored stochastic transition x_j -> x_{j-1}.
struct Transition {
  int step = 0;       // j: this transition produced x_{j-1}
  double t = 0.0;     // coefficient-evaluation time tau_j
  double dt = 0.0;
  std::vector<double> x_from;
  std::vector<double> x_to;
  std::vector<double> mean_old;  // drift mean under the behavior policy
  double noise_scale = 0.0;      // sigma(tau_j) sqrt(dt_j)
  double logp_old = 0.0;         // behavior-policy log-density of x_to
  int condition = 0;
};

// Isotropic Gaussian log-density of one transition.
inline double transition_logprob(const std::vector<double>& x_to,
                                 const std::vector<double>& mean, double noise_scale) {
  return nn::gaussian_log_density(x_to, mean, noise_scale);
}

// ============================================================================
// Integration steps
// ============================================================================

/**
 * One Euler-Maruyama step of the reverse SDE: x_{j-1} = mean + noise_scale z.
 * The returned Transition stores everything needed to recompute the policy
 * density later. noise_scale = 0 (noise_level 0) degenerates to the ODE step
 * and stores logp_old = 0.
 */
template <typename F>
  requires VelocityField<F>
inline std::pair<std::vector<double>, Transition> sde_step(
    const F& model, int c, const std::vector<double>& x, int j, const TimeGrid& grid,
    const NoiseSchedule& ns, const std::vector<double>& z) {
  if (j < 1 || j > grid.steps) throw ConfigError("sde_step: step index out of range");
  if (z.size() != x.size()) throw ShapeError("sde_step: noise dimension mismatch");
  const double tau = grid.step_time(j);
  const double dtj = grid.dt(j);
  const auto v = model(x, tau, c);
  if (v.size() != x.size()) throw ShapeError("sde_step: velocity dimension mismatch");
  for (double vi : v)
    if (!std::isfinite(vi)) throw NumericError("sde_step: non-finite velocity");
  Transition tr;
  tr.step = j;
  tr.t = tau;
  tr.dt = dtj;
  tr.x_from = x;
  tr.condition = c;
  tr.mean_old = transition_mean(x, v, tau, dtj, ns);
  tr.noise_scale = sigma(ns, tau) * std::sqrt(dtj);
  std::vector<double> x_next(x.size());
  for (size_t i = 0; i < x.size(); ++i) x_next[i] = tr.mean_old[i] + tr.noise_scale * z[i];
  for (double xi : x_next)
    if (!std::isfinite(xi)) throw NumericError("sde_step: non-finite state");
  tr.x_to = x_next;
  tr.logp_old =
      tr.noise_scale > 0.0 ? transition_logprob(x_next, tr.mean_old, tr.noise_scale) : 0.0;
  return {std::move(x_next), std::move(tr)};
}

// Deterministic Euler step of the probability-flow ODE, with the same
// coefficient-evaluation time as the SDE so noise_level = 0 matches exactly.
template <typename F>
  requires VelocityField<F>
inline std::vector<double> ode_step(const F& model, int c, const std::vector<double>& x, int j,
                                    const TimeGrid& grid) {
  if (j < 1 || j > grid.steps) throw ConfigError("ode_step: step index out of range");
  const double tau = grid.step_time(j);
  const double dtj = grid.dt(j);
  const auto v = model(x, tau, c);
  if (v.size() != x.size()) throw ShapeError("ode_step: velocity dimension mismatch");
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] - v[i] * dtj;
  return out;
}

// ============================================================================
// Full SDE pass
// ============================================================================

// Edge substream contract shared with the rollout module: the noise that
// produces the node with a given (id, step) comes from rng.derive(id, step).
// In a single chain, the node produced at step j-1 has id T - (j-1).
inline rng::Rng edge_stream(const rng::Rng& tree_rng, int node_id, int step) {
  return tree_rng.derive(static_cast<uint64_t>(node_id), static_cast<uint64_t>(step));
}

/**
 * T denoising steps from a given terminal noise state x_T down to x_0.
 * Randomness is drawn through per-edge substreams of `rng`, so a fixed stream
 * reproduces the trajectory bit-for-bit.
 */
template <typename F>
  requires VelocityField<F>
inline std::pair<std::vector<double>, std::vector<Transition>> sample_sde(
    const F& model, int c, const std::vector<double>& x_T, const TimeGrid& grid,
    const NoiseSchedule& ns, const rng::Rng& rng_stream) {
  for (double xi : x_T)
    if (!std::isfinite(xi)) throw NumericError("sample_sde: non-finite start state");
  std::vector<double> x = x_T;
  std::vector<Transition> transitions;
  transitions.reserve(static_cast<size_t>(grid.steps));
  for (int j = grid.steps; j >= 1; --j) {
    const int child_step = j - 1;
    const int child_id = grid.steps - child_step;
    auto er = edge_stream(rng_stream, child_id, child_step);
    const auto z = er.gaussian_vec(static_cast<int>(x.size()));
    auto [x_next, tr] = sde_step(model, c, x, j, grid, ns, z);
    x = std::move(x_next);
    transitions.push_back(std::move(tr));
  }
  return {std::move(x), std::move(transitions)};
}

}  // namespace treeflow::flow
