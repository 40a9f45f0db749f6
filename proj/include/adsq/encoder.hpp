#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "adsq/data_model.hpp"
#include "adsq/errors.hpp"
#include "adsq/io.hpp"

namespace adsq {

inline constexpr std::string_view kWeightMagic = "ADSQW001";

// Affine map y = x W^T + b applied to row-major batches. weight is out x in.
struct Layer {
  Matrix weight;
  Vector bias;

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }

  bool operator==(const Layer& o) const { return weight == o.weight && bias == o.bias; }
};

// Layer stack: rectified hidden layers, an identity semantic layer, then the
// hash layer whose pre-activation v is squashed to u = tanh(v).
struct EncoderParams {
  std::vector<Layer> layers;

  Index input_dim() const { return layers.front().in_dim(); }
  Index semantic_dim() const { return layers[layers.size() - 2].out_dim(); }
  Index out_dim() const { return layers.back().out_dim(); }
  std::size_t hidden_count() const { return layers.size() - 2; }

  bool operator==(const EncoderParams& o) const { return layers == o.layers; }
};

using EncoderGrads = EncoderParams;

struct NetOutputs {
  Matrix r;  // semantic features, n x semantic_dim
  Matrix v;  // hash pre-activations, n x k_half
  Matrix u;  // tanh(v)
};

// Input, hidden widths, semantic width, hash width.
inline std::vector<Index> encoder_dims(Index input_dim, const std::vector<int>& hidden, int semantic_dim, int k_half) {
  std::vector<Index> dims{input_dim};
  for (int w : hidden) dims.push_back(w);
  dims.push_back(semantic_dim);
  dims.push_back(k_half);
  return dims;
}

inline void check_structure(const EncoderParams& p) {
  if (p.layers.size() < 2) throw ConfigError("encoder needs a semantic layer and a hash layer");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    if (layer.bias.size() != layer.out_dim()) throw ShapeError("bias length does not match layer width");
    if (l > 0 && layer.in_dim() != p.layers[l - 1].out_dim()) throw ShapeError("layer dimensions do not chain");
  }
}

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias.
inline Layer glorot_layer(Index in, Index out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-a, a);
  Layer layer{Matrix(out, in), Vector::Zero(out)};
  for (Index i = 0; i < out; ++i)
    for (Index j = 0; j < in; ++j) layer.weight(i, j) = dist(rng);
  return layer;
}

// Glorot-uniform weights and zero biases, deterministic per seed.
inline EncoderParams init_params(const std::vector<Index>& dims, std::uint64_t seed) {
  if (dims.size() < 3) {
    throw ConfigError("encoder dims need input, semantic and hash widths (got " + std::to_string(dims.size()) + ")");
  }
  for (Index d : dims)
    if (d < 1) throw ConfigError("encoder widths must be positive");
  std::mt19937_64 rng(seed);
  EncoderParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) p.layers.push_back(glorot_layer(dims[l], dims[l + 1], rng));
  return p;
}

inline EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams z;
  for (const auto& l : p.layers) z.layers.push_back({Matrix::Zero(l.out_dim(), l.in_dim()), Vector::Zero(l.out_dim())});
  return z;
}

namespace detail {

inline Matrix affine(const Matrix& x, const Layer& l) {
  Matrix y = x * l.weight.transpose();
  y.rowwise() += l.bias.transpose();
  return y;
}

// Forward pass that keeps every layer input for backward().
struct Trace {
  std::vector<Matrix> inputs;  // inputs[l] is what layer l consumed
  std::vector<Matrix> pre;     // pre-activations of the hidden layers
  NetOutputs out;
};

inline Trace trace_forward(const EncoderParams& p, const Matrix& x) {
  check_structure(p);
  if (x.cols() != p.input_dim()) {
    throw ShapeError("encoder input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(p.input_dim()));
  }
  Trace t;
  Matrix h = x;
  for (std::size_t l = 0; l < p.hidden_count(); ++l) {
    t.inputs.push_back(h);
    t.pre.push_back(affine(h, p.layers[l]));
    h = t.pre.back().cwiseMax(0.0);
  }
  t.inputs.push_back(h);
  t.out.r = affine(h, p.layers[p.hidden_count()]);
  t.inputs.push_back(t.out.r);
  t.out.v = affine(t.out.r, p.layers.back());
  t.out.u = t.out.v.array().tanh();
  return t;
}

}  // namespace detail

inline NetOutputs forward(const EncoderParams& p, const Matrix& x) { return detail::trace_forward(p, x).out; }

// Reverse-mode gradients given dLoss/dr (semantic head) and dLoss/dv (hash pre-activation).
inline EncoderGrads backward(const EncoderParams& p, const Matrix& x, const Matrix& upstream_r,
                             const Matrix& upstream_v) {
  auto t = detail::trace_forward(p, x);
  if (upstream_r.rows() != x.rows() || upstream_r.cols() != p.semantic_dim()) {
    throw ShapeError("upstream_r must be n x semantic_dim");
  }
  if (upstream_v.rows() != x.rows() || upstream_v.cols() != p.out_dim()) {
    throw ShapeError("upstream_v must be n x k_half");
  }
  EncoderGrads g = zeros_like(p);
  const std::size_t last = p.layers.size() - 1;

  g.layers[last].weight.noalias() = upstream_v.transpose() * t.inputs[last];
  g.layers[last].bias = upstream_v.colwise().sum().transpose();

  Matrix delta = upstream_r;
  delta.noalias() += upstream_v * p.layers[last].weight;
  for (std::size_t l = last; l-- > 0;) {
    g.layers[l].weight.noalias() = delta.transpose() * t.inputs[l];
    g.layers[l].bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix below = delta * p.layers[l].weight;
    delta = below.array() * (t.pre[l - 1].array() > 0.0).cast<double>();
  }
  return g;
}

// Momentum buffers matching a parameter list.
struct SgdState {
  std::vector<Layer> velocity;
};

// velocity <- momentum * velocity + grad + weight_decay * param; param <- param - lr * velocity.
inline void sgd_step(std::vector<Layer>& params, const std::vector<Layer>& grads, SgdState& state, double lr,
                     double momentum, double weight_decay) {
  if (!(lr > 0.0)) throw ArgumentError("sgd_step: learning rate must be positive");
  if (grads.size() != params.size()) throw ShapeError("sgd_step: gradient layer count mismatch");
  for (const auto& g : grads) {
    if (!g.weight.allFinite() || !g.bias.allFinite()) throw TrainingError("sgd_step: non-finite gradient");
  }
  if (state.velocity.empty()) {
    for (const auto& l : params)
      state.velocity.push_back({Matrix::Zero(l.out_dim(), l.in_dim()), Vector::Zero(l.out_dim())});
  }
  for (std::size_t l = 0; l < params.size(); ++l) {
    auto& vel = state.velocity[l];
    auto& par = params[l];
    if (grads[l].weight.rows() != par.weight.rows() || grads[l].weight.cols() != par.weight.cols()) {
      throw ShapeError("sgd_step: gradient shape mismatch");
    }
    vel.weight = momentum * vel.weight + grads[l].weight + weight_decay * par.weight;
    vel.bias = momentum * vel.bias + grads[l].bias + weight_decay * par.bias;
    par.weight -= lr * vel.weight;
    par.bias -= lr * vel.bias;
  }
}

inline void sgd_step(EncoderParams& p, const EncoderGrads& g, SgdState& state, double lr, double momentum,
                     double weight_decay) {
  sgd_step(p.layers, g.layers, state, lr, momentum, weight_decay);
}

// ---- ADSQW001 ----------------------------------------------------------------

inline std::vector<std::uint8_t> serialize_layers(const std::vector<Layer>& layers) {
  io::Writer w(kWeightMagic);
  w.u32(io::checked_u32(layers.size(), "layer count"));
  for (const auto& l : layers) {
    w.u32(io::checked_u32(static_cast<std::size_t>(l.out_dim()), "rows"));
    w.u32(io::checked_u32(static_cast<std::size_t>(l.in_dim()), "cols"));
    for (Index i = 0; i < l.out_dim(); ++i)
      for (Index j = 0; j < l.in_dim(); ++j) w.value(l.weight(i, j));
    for (Index i = 0; i < l.out_dim(); ++i) w.value(l.bias(i));
  }
  return w.bytes();
}

inline void save_layers(const std::string& path, const std::vector<Layer>& layers) {
  io::save_bytes(path, serialize_layers(layers));
}

inline std::vector<Layer> load_layers(const std::string& path) {
  auto r = io::Reader::from_file(path);
  r.expect_magic(kWeightMagic);
  const std::uint32_t count = r.u32();
  std::vector<Layer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    r.require_payload((std::size_t{rows} * cols + rows) * sizeof(double));
    Layer layer{Matrix(rows, cols), Vector(rows)};
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) layer.weight(i, j) = r.value<double>();
    for (std::uint32_t i = 0; i < rows; ++i) layer.bias(i) = r.value<double>();
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) throw DataError(path + ": non-finite parameter");
    layers.push_back(std::move(layer));
  }
  r.expect_end();
  return layers;
}

inline void save_params(const std::string& path, const EncoderParams& p) { save_layers(path, p.layers); }

inline EncoderParams load_params(const std::string& path) {
  EncoderParams p{load_layers(path)};
  try {
    check_structure(p);
  } catch (const Error& e) {
    throw FormatError(path + ": " + e.what());
  }
  return p;
}

}  // namespace adsq
