#pragma once

/**
 * Minimal differentiable MLP over a flat parameter vector.
 *
 * Pieces:
 * - MlpSpec / ParamVector: architecture + flat parameters with a fixed layout
 *   (per layer: row-major weights [out x in], then biases [out]).
 * - mlp_forward / mlp_forward_trace: pure forward evaluation; the trace keeps
 *   post-activation values per layer, which is exactly what reverse mode needs.
 * - gaussian_log_density: isotropic Gaussian log-density, the transition policy
 *   density used throughout training. Kept here so the rollout path and the
 *   gradient tape share one bitwise-identical kernel.
 * - GradTape: reverse-mode gradients w.r.t. the flat parameter vector for the
 *   closed set of primitives the training objectives are built from (MLP,
 *   per-coordinate affine maps, Gaussian log-density, squared distance,
 *   parameter norm, exp/clip/min and scalar arithmetic). Not a general AD
 *   system on purpose: every node is checked for finiteness and the clip/min
 *   subgradient conventions are pinned (see below).
 * - adam_step: standard bias-corrected Adam.
 * - save_params / load_params: binary checkpoint (layout documented in README).
 *
 * Subgradient conventions (these are load-bearing for PPO-style objectives):
 * - clip(v, lo, hi): derivative 1 when lo <= v <= hi (boundary counts as
 *   inside, i.e. ties prefer the pass-through branch), 0 outside.
 * - min(a, b): derivative flows to a when a <= b (ties prefer the first
 *   argument, which callers pass as the unclipped branch).
 */

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "treeflow/errors.hpp"
#include "treeflow/rng.hpp"

namespace treeflow::nn {

// ============================================================================
// Architecture and parameters
// ============================================================================

enum class Activation { Tanh, Relu };

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation activation = Activation::Tanh;
};

inline void validate_spec(const MlpSpec& spec) {
  if (spec.input_dim < 1) throw ConfigError("MlpSpec: input_dim must be >= 1");
  if (spec.output_dim < 1) throw ConfigError("MlpSpec: output_dim must be >= 1");
  for (int h : spec.hidden_dims)
    if (h < 1) throw ConfigError("MlpSpec: hidden dims must be >= 1");
}

// Layer widths including input and output: [in, h1, ..., hk, out].
inline std::vector<int> layer_dims(const MlpSpec& spec) {
  std::vector<int> dims;
  dims.reserve(spec.hidden_dims.size() + 2);
  dims.push_back(spec.input_dim);
  for (int h : spec.hidden_dims) dims.push_back(h);
  dims.push_back(spec.output_dim);
  return dims;
}

inline int param_count(const MlpSpec& spec) {
  const auto dims = layer_dims(spec);
  int n = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l) n += (dims[l] + 1) * dims[l + 1];
  return n;
}

// Flat parameter vector; layout is (weights row-major, then biases) per layer.
struct ParamVector {
  std::vector<double> values;
};

/**
 * Deterministic init: weights ~ N(0, 1) / sqrt(fan_in), biases zero.
 */
inline ParamVector mlp_init(const MlpSpec& spec, uint64_t seed) {
  validate_spec(spec);
  rng::Rng r(seed);
  const auto dims = layer_dims(spec);
  ParamVector p;
  p.values.resize(static_cast<size_t>(param_count(spec)));
  size_t k = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < in * out; ++i) p.values[k++] = r.gaussian() * scale;
    for (int i = 0; i < out; ++i) p.values[k++] = 0.0;
  }
  return p;
}

// ============================================================================
// Forward evaluation
// ============================================================================

// One dense layer: out[o] = b[o] + sum_i w[o*in_dim + i] * in[i].
// Shared by mlp_forward_trace and the tape so both paths are bitwise equal.
inline void dense_forward(const double* w, const double* b, const double* in,
                          int in_dim, int out_dim, double* out) {
  for (int o = 0; o < out_dim; ++o) {
    double acc = b[o];
    const double* row = w + static_cast<size_t>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

inline double apply_activation(Activation a, double z) {
  return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

/**
 * Full forward pass keeping the post-activation value of every layer:
 * trace[0] = input, trace[l+1] = layer l output (activation applied on hidden
 * layers, linear on the last). trace.back() is the network output.
 */
inline std::vector<std::vector<double>> mlp_forward_trace(
    const MlpSpec& spec, const ParamVector& params, const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != spec.input_dim)
    throw ShapeError("mlp_forward: input length does not match spec.input_dim");
  if (static_cast<int>(params.values.size()) != param_count(spec))
    throw ShapeError("mlp_forward: params length does not match spec layout");
  const auto dims = layer_dims(spec);
  std::vector<std::vector<double>> trace;
  trace.reserve(dims.size());
  trace.push_back(input);
  size_t off = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const double* w = params.values.data() + off;
    const double* b = params.values.data() + off + static_cast<size_t>(in) * out;
    std::vector<double> y(static_cast<size_t>(out));
    dense_forward(w, b, trace.back().data(), in, out, y.data());
    const bool last = (l + 2 == dims.size());
    if (!last)
      for (auto& v : y) v = apply_activation(spec.activation, v);
    trace.push_back(std::move(y));
    off += static_cast<size_t>(in + 1) * out;
  }
  return trace;
}

inline std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                       const std::vector<double>& input) {
  return mlp_forward_trace(spec, params, input).back();
}

// ============================================================================
// Gaussian log-density (shared transition-policy kernel)
// ============================================================================

/**
 * log N(x; mean, scale^2 I) = sum_i [ -0.5 log(2 pi scale^2) - (x_i - mean_i)^2 / (2 scale^2) ].
 *
 * Every call site (rollout logp_old storage, ratio recomputation, gradient
 * tape) must go through this one function: the trainer relies on the ratio
 * being exactly 1.0 when the current parameters equal the behavior snapshot.
 */
inline double gaussian_log_density(const std::vector<double>& x,
                                   const std::vector<double>& mean, double scale) {
  if (scale <= 0.0) throw ConfigError("gaussian_log_density: scale must be positive");
  if (x.size() != mean.size())
    throw ShapeError("gaussian_log_density: x and mean lengths differ");
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * scale * scale);
  const double inv_two_var = 1.0 / (2.0 * scale * scale);
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    acc += log_norm - d * d * inv_two_var;
  }
  return acc;
}

// ============================================================================
// Reverse-mode gradient tape
// ============================================================================

class GradTape {
 public:
  struct Scalar { int id = -1; };
  struct Vec { int id = -1; };

  GradTape(const MlpSpec& spec, const ParamVector& params)
      : spec_(spec), params_(params) {
    validate_spec(spec);
    if (static_cast<int>(params.values.size()) != param_count(spec))
      throw ShapeError("GradTape: params length does not match spec layout");
  }

  // ---- vector-valued nodes ----

  // Forward of the owned MLP on a constant input; gradients flow to params.
  Vec mlp(const std::vector<double>& input) {
    Node n;
    n.op = Op::Mlp;
    n.trace = mlp_forward_trace(spec_, params_, input);
    n.val = n.trace.back();
    return {push(std::move(n), "mlp")};
  }

  /**
   * Per-coordinate affine-like map y_i = fn(v_i) whose analytic derivative
   * dy_i/dv_i is the constant `slope`. The forward value is produced by
   * calling fn directly so a caller can reuse a shared kernel verbatim
   * (bitwise), while the backward pass uses the supplied slope.
   */
  Vec affine_map(Vec v, const std::function<double(int, double)>& fn, double slope,
                 const char* label = "affine_map") {
    const Node& src = node(v.id);
    Node n;
    n.op = Op::Affine;
    n.a = v.id;
    n.c0 = slope;
    n.val.resize(src.val.size());
    for (size_t i = 0; i < src.val.size(); ++i)
      n.val[i] = fn(static_cast<int>(i), src.val[i]);
    return {push(std::move(n), label)};
  }

  // ---- scalar-valued nodes ----

  Scalar gaussian_logp(Vec mean, const std::vector<double>& x, double scale) {
    const Node& m = node(mean.id);
    if (x.size() != m.val.size())
      throw ShapeError("GradTape::gaussian_logp: x and mean lengths differ");
    Node n;
    n.op = Op::GaussLogp;
    n.a = mean.id;
    n.aux = x;
    n.c0 = scale;
    n.val = {gaussian_log_density(x, m.val, scale)};
    return {push(std::move(n), "gaussian_logp")};
  }

  Scalar squared_distance(Vec a, const std::vector<double>& target) {
    const Node& src = node(a.id);
    if (target.size() != src.val.size())
      throw ShapeError("GradTape::squared_distance: target length differs");
    Node n;
    n.op = Op::SqDist;
    n.a = a.id;
    n.aux = target;
    double acc = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
      const double d = src.val[i] - target[i];
      acc += d * d;
    }
    n.val = {acc};
    return {push(std::move(n), "squared_distance")};
  }

  Scalar param_squared_norm() {
    Node n;
    n.op = Op::ParamNorm;
    double acc = 0.0;
    for (double v : params_.values) acc += v * v;
    n.val = {acc};
    return {push(std::move(n), "param_squared_norm")};
  }

  Scalar constant(double v) {
    Node n;
    n.op = Op::Const;
    n.val = {v};
    return {push(std::move(n), "constant")};
  }

  Scalar add(Scalar a, Scalar b) { return binary(Op::Add, a, b, "add"); }
  Scalar sub(Scalar a, Scalar b) { return binary(Op::Sub, a, b, "sub"); }

  Scalar add_const(Scalar a, double c) {
    Node n;
    n.op = Op::AddConst;
    n.a = a.id;
    n.c0 = c;
    n.val = {node(a.id).val[0] + c};
    return {push(std::move(n), "add_const")};
  }

  Scalar mul_const(Scalar a, double c) {
    Node n;
    n.op = Op::MulConst;
    n.a = a.id;
    n.c0 = c;
    n.val = {node(a.id).val[0] * c};
    return {push(std::move(n), "mul_const")};
  }

  Scalar exp(Scalar a) {
    Node n;
    n.op = Op::Exp;
    n.a = a.id;
    n.val = {std::exp(node(a.id).val[0])};
    return {push(std::move(n), "exp")};
  }

  // Boundary counts as pass-through (derivative 1 at v == lo and v == hi).
  Scalar clip(Scalar a, double lo, double hi) {
    const double v = node(a.id).val[0];
    Node n;
    n.op = Op::Clip;
    n.a = a.id;
    n.c0 = (v >= lo && v <= hi) ? 1.0 : 0.0;
    n.val = {std::min(std::max(v, lo), hi)};
    return {push(std::move(n), "clip")};
  }

  // Ties prefer the first argument (callers pass the unclipped branch first).
  Scalar min(Scalar a, Scalar b) {
    const double va = node(a.id).val[0], vb = node(b.id).val[0];
    Node n;
    n.op = Op::Min;
    n.a = a.id;
    n.b = b.id;
    n.c0 = (va <= vb) ? 0.0 : 1.0;  // which input receives the adjoint
    n.val = {va <= vb ? va : vb};
    return {push(std::move(n), "min")};
  }

  Scalar mean(const std::vector<Scalar>& xs) {
    if (xs.empty()) throw ConfigError("GradTape::mean: empty list");
    Node n;
    n.op = Op::Mean;
    n.ids.reserve(xs.size());
    double acc = 0.0;
    for (Scalar s : xs) {
      n.ids.push_back(s.id);
      acc += node(s.id).val[0];
    }
    n.val = {acc / static_cast<double>(xs.size())};
    return {push(std::move(n), "mean")};
  }

  double value(Scalar s) const { return node(s.id).val[0]; }
  const std::vector<double>& value(Vec v) const { return node(v.id).val; }

  /**
   * d value(root) / d params, by a single reverse sweep. May be called once
   * per built tape.
   */
  std::vector<double> gradient(Scalar root) {
    std::vector<double> grad(params_.values.size(), 0.0);
    for (auto& n : nodes_) n.adj.assign(n.val.size(), 0.0);
    node(root.id).adj[0] = 1.0;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id)
      backward(node(id), grad);
    for (double g : grad)
      if (!std::isfinite(g)) throw NumericError("gradient: non-finite parameter gradient");
    return grad;
  }

 private:
  enum class Op {
    Mlp, Affine, GaussLogp, SqDist, ParamNorm, Const,
    Add, Sub, AddConst, MulConst, Exp, Clip, Min, Mean
  };

  struct Node {
    Op op;
    std::vector<double> val;   // forward value (size 1 for scalars)
    std::vector<double> adj;   // adjoints, allocated by gradient()
    int a = -1, b = -1;        // input node ids
    std::vector<int> ids;      // inputs for Mean
    double c0 = 0.0;           // op constant (slope, scale, addend, selector)
    std::vector<double> aux;   // op constants (targets, observations)
    std::vector<std::vector<double>> trace;  // Mlp only
  };

  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  int push(Node&& n, const char* label) {
    for (double v : n.val)
      if (!std::isfinite(v))
        throw NumericError(std::string("GradTape: non-finite value in ") + label);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Scalar binary(Op op, Scalar a, Scalar b, const char* label) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    const double va = node(a.id).val[0], vb = node(b.id).val[0];
    n.val = {op == Op::Add ? va + vb : va - vb};
    return {push(std::move(n), label)};
  }

  void backward(Node& n, std::vector<double>& grad) {
    switch (n.op) {
      case Op::Mlp:
        backward_mlp(n, grad);
        break;
      case Op::Affine: {
        auto& src = node(n.a);
        for (size_t i = 0; i < n.adj.size(); ++i) src.adj[i] += n.c0 * n.adj[i];
        break;
      }
      case Op::GaussLogp: {
        auto& m = node(n.a);
        const double inv_var = 1.0 / (n.c0 * n.c0);
        for (size_t i = 0; i < m.adj.size(); ++i)
          m.adj[i] += n.adj[0] * (n.aux[i] - m.val[i]) * inv_var;
        break;
      }
      case Op::SqDist: {
        auto& a = node(n.a);
        for (size_t i = 0; i < a.adj.size(); ++i)
          a.adj[i] += n.adj[0] * 2.0 * (a.val[i] - n.aux[i]);
        break;
      }
      case Op::ParamNorm:
        for (size_t i = 0; i < grad.size(); ++i)
          grad[i] += n.adj[0] * 2.0 * params_.values[i];
        break;
      case Op::Const:
        break;
      case Op::Add:
        node(n.a).adj[0] += n.adj[0];
        node(n.b).adj[0] += n.adj[0];
        break;
      case Op::Sub:
        node(n.a).adj[0] += n.adj[0];
        node(n.b).adj[0] -= n.adj[0];
        break;
      case Op::AddConst:
        node(n.a).adj[0] += n.adj[0];
        break;
      case Op::MulConst:
        node(n.a).adj[0] += n.c0 * n.adj[0];
        break;
      case Op::Exp:
        node(n.a).adj[0] += n.val[0] * n.adj[0];
        break;
      case Op::Clip:
        node(n.a).adj[0] += n.c0 * n.adj[0];
        break;
      case Op::Min:
        node(n.c0 == 0.0 ? n.a : n.b).adj[0] += n.adj[0];
        break;
      case Op::Mean: {
        const double share = n.adj[0] / static_cast<double>(n.ids.size());
        for (int id : n.ids) node(id).adj[0] += share;
        break;
      }
    }
  }

  // Standard dense backprop through the stored trace; accumulates into the
  // flat gradient using the (weights row-major, then biases) layout.
  void backward_mlp(Node& n, std::vector<double>& grad) {
    const auto dims = layer_dims(spec_);
    const int layers = static_cast<int>(dims.size()) - 1;
    // Parameter offset of each layer.
    std::vector<size_t> off(static_cast<size_t>(layers));
    size_t o = 0;
    for (int l = 0; l < layers; ++l) {
      off[static_cast<size_t>(l)] = o;
      o += static_cast<size_t>(dims[l] + 1) * dims[l + 1];
    }
    std::vector<double> delta = n.adj;  // d loss / d output
    for (int l = layers - 1; l >= 0; --l) {
      const int in = dims[l], out = dims[l + 1];
      const auto& a_in = n.trace[static_cast<size_t>(l)];
      const auto& a_out = n.trace[static_cast<size_t>(l) + 1];
      if (l != layers - 1) {
        // Hidden layer: fold in activation derivative from post-activation.
        for (int i = 0; i < out; ++i) {
          const double d = spec_.activation == Activation::Tanh
                               ? 1.0 - a_out[static_cast<size_t>(i)] * a_out[static_cast<size_t>(i)]
                               : (a_out[static_cast<size_t>(i)] > 0.0 ? 1.0 : 0.0);
          delta[static_cast<size_t>(i)] *= d;
        }
      }
      const size_t w0 = off[static_cast<size_t>(l)];
      const size_t b0 = w0 + static_cast<size_t>(in) * out;
      std::vector<double> prev(static_cast<size_t>(in), 0.0);
      for (int r = 0; r < out; ++r) {
        const double dr = delta[static_cast<size_t>(r)];
        const size_t row = w0 + static_cast<size_t>(r) * in;
        for (int i = 0; i < in; ++i) {
          grad[row + static_cast<size_t>(i)] += dr * a_in[static_cast<size_t>(i)];
          prev[static_cast<size_t>(i)] += params_.values[row + static_cast<size_t>(i)] * dr;
        }
        grad[b0 + static_cast<size_t>(r)] += dr;
      }
      delta = std::move(prev);
    }
  }

  const MlpSpec& spec_;
  const ParamVector& params_;
  std::vector<Node> nodes_;
};

struct GradResult {
  double value = 0.0;
  std::vector<double> gradient;
};

/**
 * Gradient of a scalar loss built from tape primitives, w.r.t. params.
 */
inline GradResult grad_scalar(const MlpSpec& spec, const ParamVector& params,
                              const std::function<GradTape::Scalar(GradTape&)>& build) {
  GradTape tape(spec, params);
  const GradTape::Scalar root = build(tape);
  GradResult res;
  res.value = tape.value(root);
  res.gradient = tape.gradient(root);
  return res;
}

// ============================================================================
// Adam
// ============================================================================

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
};

/**
 * One bias-corrected Adam step, in place. Moments are lazily sized on first use.
 */
inline void adam_step(ParamVector& params, const std::vector<double>& grad, AdamState& st) {
  if (grad.size() != params.values.size())
    throw ShapeError("adam_step: grad and params lengths differ");
  for (double g : grad)
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
  if (st.first_moment.empty()) st.first_moment.assign(params.values.size(), 0.0);
  if (st.second_moment.empty()) st.second_moment.assign(params.values.size(), 0.0);
  if (st.first_moment.size() != params.values.size())
    throw ShapeError("adam_step: optimizer state size mismatch");
  st.step_count += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  for (size_t i = 0; i < params.values.size(); ++i) {
    st.first_moment[i] = st.beta1 * st.first_moment[i] + (1.0 - st.beta1) * grad[i];
    st.second_moment[i] = st.beta2 * st.second_moment[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    const double mhat = st.first_moment[i] / bc1;
    const double vhat = st.second_moment[i] / bc2;
    params.values[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps_adam);
  }
}

// ============================================================================
// Checkpoint IO
// ============================================================================

// Format (little-endian):
//   bytes 0..7   magic "TFMLP001"
//   u32          activation tag (0 = tanh, 1 = relu)
//   u32          input_dim
//   u32          hidden layer count
//   u32 * k      hidden dims
//   u32          output_dim
//   u64          parameter count
//   f64 * count  parameter values (layout: per layer, weights row-major then biases)
inline constexpr char kCheckpointMagic[8] = {'T', 'F', 'M', 'L', 'P', '0', '0', '1'};

inline void save_params(const std::string& path, const MlpSpec& spec, const ParamVector& params) {
  if (static_cast<int>(params.values.size()) != param_count(spec))
    throw ShapeError("save_params: params length does not match spec layout");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_params: cannot open " + path);
  auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_u64 = [&](uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  f.write(kCheckpointMagic, 8);
  put_u32(spec.activation == Activation::Tanh ? 0u : 1u);
  put_u32(static_cast<uint32_t>(spec.input_dim));
  put_u32(static_cast<uint32_t>(spec.hidden_dims.size()));
  for (int h : spec.hidden_dims) put_u32(static_cast<uint32_t>(h));
  put_u32(static_cast<uint32_t>(spec.output_dim));
  put_u64(static_cast<uint64_t>(params.values.size()));
  f.write(reinterpret_cast<const char*>(params.values.data()),
          static_cast<std::streamsize>(params.values.size() * sizeof(double)));
  if (!f) throw IoError("save_params: write failed for " + path);
}

inline std::pair<MlpSpec, ParamVector> load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_params: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("load_params: bad magic in " + path);
  auto get_u32 = [&]() {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get_u64 = [&]() {
    uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  MlpSpec spec;
  const uint32_t act = get_u32();
  if (act > 1) throw IoError("load_params: unknown activation tag");
  spec.activation = act == 0 ? Activation::Tanh : Activation::Relu;
  spec.input_dim = static_cast<int>(get_u32());
  const uint32_t hidden = get_u32();
  if (hidden > 64) throw IoError("load_params: implausible hidden layer count");
  spec.hidden_dims.resize(hidden);
  for (auto& h : spec.hidden_dims) h = static_cast<int>(get_u32());
  spec.output_dim = static_cast<int>(get_u32());
  const uint64_t count = get_u64();
  if (!f) throw IoError("load_params: truncated header in " + path);
  validate_spec(spec);
  if (count != static_cast<uint64_t>(param_count(spec)))
    throw IoError("load_params: parameter count does not match spec layout");
  ParamVector params;
  params.values.resize(count);
  f.read(reinterpret_cast<char*>(params.values.data()),
         static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw IoError("load_params: truncated parameters in " + path);
  return {spec, params};
}

}  // namespace treeflow::nn
