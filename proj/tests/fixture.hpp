#pragma once

// Desk-scale separability fixture shared by the acceptance runner and the
// trainer/CLI tests.

#include "adsq/adsq.hpp"

namespace fixture {

inline adsq::SynthSpec synth_spec(std::uint64_t seed) {
  adsq::SynthSpec s;
  s.classes = 4;
  s.dim = 32;
  s.per_class = 100;
  s.queries_per_class = 25;
  s.cluster_spread = 1.0;
  s.center_scale = 1.0;
  s.seed = seed;
  return s;
}

// alpha, beta, gamma, nu, eta keep the library defaults.
inline adsq::HyperParams hyper_params(std::uint64_t seed, adsq::Variant variant = adsq::Variant::full) {
  adsq::HyperParams h;
  h.k_half = 8;
  h.encoder_hidden = {64};
  h.semantic_dim = 32;
  h.t_label = 10;
  h.t_img = 3;
  h.outer_rounds = 10;
  h.batch_size = 32;
  h.lr_min = 1e-6;
  h.lr_max = 1e-5;
  h.lr_steps = 3;
  h.seed = seed;
  h.variant = variant;
  return h;
}

// mAP@R of query codes against the training-set database codes.
inline double retrieval_map(const adsq::EncoderParams& imgx, const adsq::EncoderParams& imgy,
                            const adsq::SynthData& d, std::size_t cutoff = 100) {
  const auto q = adsq::pack(adsq::encode_queries(d.query.features, imgx, imgy));
  const auto db = adsq::pack(adsq::encode_queries(d.train.features, imgx, imgy));
  return adsq::mean_ap(q, db, adsq::RelevanceJudge(d.query.labels, d.train.labels), cutoff);
}

}  // namespace fixture
