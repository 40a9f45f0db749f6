#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "adsq/data_model.hpp"
#include "adsq/encoder.hpp"
#include "adsq/minibatch.hpp"
#include "adsq/numerics.hpp"

namespace adsq {

inline constexpr std::string_view kSupervisionMagic = "ADSQS001";

// Raw (unweighted) term values and the weighted total.
struct LossBreakdown {
  double j1 = 0.0;
  double j2 = 0.0;
  double j3 = 0.0;
  double j4 = 0.0;
  double asym = 0.0;
  double total = 0.0;
};

// LabelNet outputs cached for every training item, consumed by the image networks.
struct LabelSupervision {
  Matrix r;      // n x semantic_dim
  Matrix omega;  // n x k_half, entries in (-1, 1)
  int source_epoch = 0;
};

// Linear classifier on the LabelNet codes: predicted labels = omega W^T + b.
using ClassifierHead = Layer;

struct LabelNetGrad {
  Matrix d_r;
  Matrix d_omega;
  ClassifierHead d_head;
};

namespace detail {

// Sum over ordered pairs i != j of softplus(logit) - s * logit.
inline double pair_likelihood(const Matrix& logits, const Matrix& s) {
  double acc = 0.0;
  for (Index j = 0; j < logits.cols(); ++j)
    for (Index i = 0; i < logits.rows(); ++i)
      if (i != j) acc += pair_nll(s(i, j), logits(i, j));
  return acc;
}

// dNLL/dlogit = sigmoid(logit) - s, zero on the diagonal.
inline Matrix pair_likelihood_slope(const Matrix& logits, const Matrix& s) {
  Matrix g(logits.rows(), logits.cols());
  for (Index j = 0; j < logits.cols(); ++j)
    for (Index i = 0; i < logits.rows(); ++i) g(i, j) = i == j ? 0.0 : sigmoid_stable(logits(i, j)) - s(i, j);
  return g;
}

inline double sgn(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

inline void check_finite_term(double v, const char* term) {
  if (!std::isfinite(v)) throw TrainingError(std::string("non-finite loss term ") + term);
}

}  // namespace detail

inline double quantization_penalty(const Matrix& omega, bool literal) {
  return literal ? (omega.array() - 1.0).abs().sum() : (omega.array().abs() - 1.0).abs().sum();
}

// alpha J1 + beta J2 + gamma J3 + delta J4 over all ordered within-batch pairs i != j.
inline LossBreakdown labelnet_loss(const NetOutputs& outs, const ClassifierHead& head, const Matrix& s_binary,
                                   const Matrix& labels, const HyperParams& h) {
  const Index m = outs.r.rows();
  if (s_binary.rows() != m || s_binary.cols() != m || outs.u.rows() != m || labels.rows() != m) {
    throw ShapeError("labelnet_loss: outputs, similarity and labels must cover the same items");
  }
  if (head.in_dim() != outs.u.cols() || head.out_dim() != labels.cols()) {
    throw ShapeError("labelnet_loss: classifier head shape mismatch");
  }
  LossBreakdown b;
  const Matrix lambda = 0.5 * outs.r * outs.r.transpose();
  const Matrix theta = 0.5 * outs.u * outs.u.transpose();
  b.j1 = detail::pair_likelihood(lambda, s_binary);
  b.j2 = detail::pair_likelihood(theta, s_binary);
  b.j3 = 2.0 * static_cast<double>(m - 1) * quantization_penalty(outs.u, h.j3_literal);
  Matrix pred = outs.u * head.weight.transpose();
  pred.rowwise() += head.bias.transpose();
  b.j4 = (pred - labels).squaredNorm();
  detail::check_finite_term(b.j1, "J1");
  detail::check_finite_term(b.j2, "J2");
  detail::check_finite_term(b.j3, "J3");
  detail::check_finite_term(b.j4, "J4");
  b.total = h.alpha * b.j1 + h.beta * b.j2 + h.gamma * b.j3 + h.delta * b.j4;
  return b;
}

// Exact gradients of labelnet_loss w.r.t. r, omega (= u) and the classifier head.
inline LabelNetGrad labelnet_grad(const NetOutputs& outs, const ClassifierHead& head, const Matrix& s_binary,
                                  const Matrix& labels, const HyperParams& h) {
  const Index m = outs.r.rows();
  if (s_binary.rows() != m || s_binary.cols() != m || outs.u.rows() != m || labels.rows() != m) {
    throw ShapeError("labelnet_grad: outputs, similarity and labels must cover the same items");
  }
  LabelNetGrad g;
  const Matrix lambda = 0.5 * outs.r * outs.r.transpose();
  const Matrix theta = 0.5 * outs.u * outs.u.transpose();
  const Matrix g1 = detail::pair_likelihood_slope(lambda, s_binary);
  const Matrix g2 = detail::pair_likelihood_slope(theta, s_binary);
  g.d_r = h.alpha * 0.5 * (g1 + g1.transpose()) * outs.r;
  g.d_omega = h.beta * 0.5 * (g2 + g2.transpose()) * outs.u;

  const double pair_count = 2.0 * static_cast<double>(m - 1);
  Matrix d3(outs.u.rows(), outs.u.cols());
  for (Index j = 0; j < d3.cols(); ++j)
    for (Index i = 0; i < d3.rows(); ++i) {
      const double w = outs.u(i, j);
      d3(i, j) = h.j3_literal ? detail::sgn(w - 1.0) : detail::sgn(std::abs(w) - 1.0) * detail::sgn(w);
    }
  g.d_omega += h.gamma * pair_count * d3;

  Matrix pred = outs.u * head.weight.transpose();
  pred.rowwise() += head.bias.transpose();
  const Matrix err = pred - labels;
  g.d_omega += h.delta * 2.0 * err * head.weight;
  g.d_head.weight = h.delta * 2.0 * err.transpose() * outs.u;
  g.d_head.bias = h.delta * 2.0 * err.colwise().sum().transpose();
  return g;
}

// LabelNet encoder, classifier head and their optimiser state.
struct LabelNet {
  EncoderParams net;
  ClassifierHead head;
  SgdState net_opt;
  SgdState head_opt;
};

inline LabelNet init_labelnet(Index classes, const HyperParams& h, std::uint64_t seed) {
  std::vector<int> hidden;
  if (!h.encoder_hidden.empty()) hidden.push_back(h.encoder_hidden.front());
  LabelNet ln;
  ln.net = init_params(encoder_dims(classes, hidden, h.semantic_dim, h.k_half), seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  ln.head = glorot_layer(h.k_half, classes, rng);
  return ln;
}

// One pass over shuffled minibatches. Returns the summed batch loss.
inline double train_labelnet_epoch(LabelNet& ln, const Dataset& data, const SimilarityMatrix& s, const HyperParams& h,
                                   double lr, std::uint64_t shuffle_seed) {
  const Matrix labels = data.label_features();
  double epoch_loss = 0.0;
  for (const auto& batch : make_batches(data.size(), h.batch_size, shuffle_seed)) {
    const Matrix x = gather_rows(labels, batch);
    const Matrix sb = s.binary_block(batch);
    const auto outs = forward(ln.net, x);
    epoch_loss += labelnet_loss(outs, ln.head, sb, x, h).total;
    const auto g = labelnet_grad(outs, ln.head, sb, x, h);
    const Matrix d_v = g.d_omega.array() * (1.0 - outs.u.array().square());
    const auto net_grads = backward(ln.net, x, g.d_r, d_v);
    sgd_step(ln.net, net_grads, ln.net_opt, lr, h.momentum, h.weight_decay);
    std::vector<Layer> head{ln.head};
    sgd_step(head, {g.d_head}, ln.head_opt, lr, h.momentum, h.weight_decay);
    ln.head = std::move(head.front());
  }
  return epoch_loss;
}

inline LabelSupervision labelnet_supervision(const LabelNet& ln, const Dataset& data, int source_epoch) {
  const auto outs = forward(ln.net, data.label_features());
  return {outs.r, outs.u, source_epoch};
}

inline LossBreakdown labelnet_full_loss(const LabelNet& ln, const Dataset& data, const SimilarityMatrix& s,
                                        const HyperParams& h) {
  const Matrix labels = data.label_features();
  return labelnet_loss(forward(ln.net, labels), ln.head, s.binary_dense(), labels, h);
}

// ---- ADSQS001 --------------------------------------------------------------

inline void save_supervision(const std::string& path, const LabelSupervision& sup) {
  io::Writer w(kSupervisionMagic);
  w.u32(io::checked_u32(static_cast<std::size_t>(sup.r.rows()), "n"));
  w.u32(io::checked_u32(static_cast<std::size_t>(sup.r.cols()), "semantic_dim"));
  w.u32(io::checked_u32(static_cast<std::size_t>(sup.omega.cols()), "k_half"));
  for (Index i = 0; i < sup.r.rows(); ++i)
    for (Index j = 0; j < sup.r.cols(); ++j) w.value(sup.r(i, j));
  for (Index i = 0; i < sup.omega.rows(); ++i)
    for (Index j = 0; j < sup.omega.cols(); ++j) w.value(sup.omega(i, j));
  w.save(path);
}

inline LabelSupervision load_supervision(const std::string& path) {
  auto r = io::Reader::from_file(path);
  r.expect_magic(kSupervisionMagic);
  const std::uint32_t n = r.u32();
  const std::uint32_t sem = r.u32();
  const std::uint32_t k = r.u32();
  r.require_payload(std::size_t{n} * (sem + k) * sizeof(double));
  LabelSupervision sup{Matrix(n, sem), Matrix(n, k), 0};
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < sem; ++j) sup.r(i, j) = r.value<double>();
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < k; ++j) sup.omega(i, j) = r.value<double>();
  r.expect_end();
  return sup;
}

}  // namespace adsq
