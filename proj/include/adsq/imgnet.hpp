#pragma once

#include <cstdint>
#include <vector>

#include "adsq/data_model.hpp"
#include "adsq/encoder.hpp"
#include "adsq/labelnet.hpp"
#include "adsq/minibatch.hpp"
#include "adsq/numerics.hpp"

namespace adsq {

// Per-term multipliers applied on top of the hyper-parameter weights.
struct TermMask {
  double j1 = 1.0;
  double j2 = 1.0;
  double j3 = 1.0;
  double j4 = 1.0;
  double asym = 1.0;

  bool operator==(const TermMask&) const = default;
};

// no_asym drops the asymmetric term, no_sem drops the semantic likelihood J1,
// no_both drops both. full and symmetric keep everything.
inline TermMask variant_loss_mask(Variant v) {
  TermMask m;
  switch (v) {
    case Variant::no_asym: m.asym = 0.0; break;
    case Variant::no_sem: m.j1 = 0.0; break;
    case Variant::no_both:
      m.asym = 0.0;
      m.j1 = 0.0;
      break;
    case Variant::full:
    case Variant::symmetric: break;
  }
  return m;
}

// Everything the image objective needs for one batch; all rows follow the same index list.
struct ImgBatchContext {
  Matrix u;          // tanh outputs, m x k_half
  Matrix r_img;      // semantic outputs, m x semantic_dim
  Matrix sup_r;      // LabelNet semantic rows
  Matrix sup_omega;  // LabelNet code rows
  Matrix codes;      // current discrete codes B, entries +-1
  Matrix s_binary;   // m x m, {0,1}
  Matrix s_signed;   // m x m, {-1,+1}

  Index size() const { return u.rows(); }
  Index k_half() const { return u.cols(); }

  void check() const {
    const Index m = size();
    const bool ok = r_img.rows() == m && sup_r.rows() == m && sup_omega.rows() == m && codes.rows() == m &&
                    s_binary.rows() == m && s_binary.cols() == m && s_signed.rows() == m && s_signed.cols() == m &&
                    codes.cols() == u.cols() && sup_omega.cols() == u.cols() && sup_r.cols() == r_img.cols();
    if (!ok) throw ShapeError("ImgBatchContext: misaligned rows or columns");
  }
};

inline ImgBatchContext make_context(const NetOutputs& outs, const LabelSupervision& sup, const Matrix& codes,
                                    const SimilarityMatrix& s, const std::vector<Index>& idx) {
  ImgBatchContext ctx;
  ctx.u = outs.u;
  ctx.r_img = outs.r;
  ctx.sup_r = gather_rows(sup.r, idx);
  ctx.sup_omega = gather_rows(sup.omega, idx);
  ctx.codes = gather_rows(codes, idx);
  ctx.s_binary = s.binary_block(idx);
  ctx.s_signed = 2.0 * ctx.s_binary.array() - 1.0;
  return ctx;
}

// alpha J1 + beta J2 + eta J3 + nu J4 + A with the variant's terms removed.
// Masked terms are not evaluated and report 0 in the breakdown.
inline LossBreakdown imgnet_loss(const ImgBatchContext& ctx, const HyperParams& h, Variant variant) {
  ctx.check();
  const TermMask mask = variant_loss_mask(variant);
  const double k = static_cast<double>(ctx.k_half());
  LossBreakdown b;
  if (mask.j1 != 0.0) {
    const Matrix lambda = 0.5 * ctx.sup_r * ctx.r_img.transpose();
    b.j1 = detail::pair_likelihood(lambda, ctx.s_binary);
  }
  const Matrix theta = 0.5 * ctx.sup_omega * ctx.u.transpose();
  b.j2 = detail::pair_likelihood(theta, ctx.s_binary);
  b.j3 = (ctx.u - ctx.codes).squaredNorm();
  b.j4 = ctx.u.colwise().sum().squaredNorm();
  if (mask.asym != 0.0) b.asym = (ctx.u * ctx.codes.transpose() - k * ctx.s_signed).squaredNorm();
  detail::check_finite_term(b.j1, "J1");
  detail::check_finite_term(b.j2, "J2");
  detail::check_finite_term(b.j3, "J3");
  detail::check_finite_term(b.j4, "J4");
  detail::check_finite_term(b.asym, "A");
  b.total = mask.j1 * h.alpha * b.j1 + mask.j2 * h.beta * b.j2 + mask.j3 * h.eta * b.j3 + mask.j4 * h.nu * b.j4 +
            mask.asym * b.asym;
  return b;
}

struct ImgNetGrad {
  Matrix d_r;  // into the semantic head
  Matrix d_u;
  Matrix d_v;  // d_u * (1 - u^2)
};

// Exact gradients of imgnet_loss. J1 depends on the semantic output only, so
// its contribution goes to d_r; every other term reaches v through u = tanh(v).
inline ImgNetGrad imgnet_grad(const ImgBatchContext& ctx, const HyperParams& h, Variant variant) {
  ctx.check();
  const TermMask mask = variant_loss_mask(variant);
  const double k = static_cast<double>(ctx.k_half());
  ImgNetGrad g;
  if (mask.j1 != 0.0) {
    const Matrix lambda = 0.5 * ctx.sup_r * ctx.r_img.transpose();
    g.d_r = mask.j1 * h.alpha * 0.5 * detail::pair_likelihood_slope(lambda, ctx.s_binary).transpose() * ctx.sup_r;
  } else {
    g.d_r = Matrix::Zero(ctx.r_img.rows(), ctx.r_img.cols());
  }
  const Matrix theta = 0.5 * ctx.sup_omega * ctx.u.transpose();
  g.d_u = mask.j2 * h.beta * 0.5 * detail::pair_likelihood_slope(theta, ctx.s_binary).transpose() * ctx.sup_omega;
  g.d_u += mask.j3 * 2.0 * h.eta * (ctx.u - ctx.codes);
  const RowVector col_sum = ctx.u.colwise().sum();
  g.d_u.rowwise() += mask.j4 * 2.0 * h.nu * col_sum;
  if (mask.asym != 0.0) {
    g.d_u += mask.asym * 2.0 * (ctx.u * ctx.codes.transpose() - k * ctx.s_signed) * ctx.codes;
  }
  g.d_v = g.d_u.array() * (1.0 - ctx.u.array().square());
  return g;
}

inline Matrix grad_v(const ImgBatchContext& ctx, const HyperParams& h, Variant variant) {
  return imgnet_grad(ctx, h, variant).d_v;
}

// One pass of minibatch SGD on a single image network with the codes held fixed.
inline double wstep_epoch(EncoderParams& p, SgdState& opt, const Dataset& data, const SimilarityMatrix& s,
                          const Matrix& codes, const LabelSupervision& sup, const HyperParams& h, Variant variant,
                          double lr, std::uint64_t shuffle_seed) {
  if (codes.rows() != data.size() || sup.r.rows() != data.size()) {
    throw ShapeError("wstep_epoch: codes and supervision must cover the training set");
  }
  double epoch_loss = 0.0;
  for (const auto& batch : make_batches(data.size(), h.batch_size, shuffle_seed)) {
    const Matrix x = gather_rows(data.features, batch);
    const auto outs = forward(p, x);
    const auto ctx = make_context(outs, sup, codes, s, batch);
    epoch_loss += imgnet_loss(ctx, h, variant).total;
    const auto g = imgnet_grad(ctx, h, variant);
    sgd_step(p, backward(p, x, g.d_r, g.d_v), opt, lr, h.momentum, h.weight_decay);
  }
  return epoch_loss;
}

// Image objective over the whole training set as one batch.
inline LossBreakdown imgnet_full_loss(const EncoderParams& p, const Dataset& data, const SimilarityMatrix& s,
                                      const Matrix& codes, const LabelSupervision& sup, const HyperParams& h,
                                      Variant variant) {
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  return imgnet_loss(make_context(forward(p, data.features), sup, codes, s, all), h, variant);
}

}  // namespace adsq
