// Train on a small synthetic set and report retrieval quality of the codes.

#include <iostream>

#include "adsq/adsq.hpp"

int main() {
  adsq::SynthSpec spec;
  spec.per_class = 60;
  spec.queries_per_class = 15;
  const auto data = adsq::generate(spec);
  const auto s = adsq::build_similarity(data.train.labels);

  adsq::HyperParams h;
  h.encoder_hidden = {64};
  h.semantic_dim = 32;
  h.outer_rounds = 6;
  h.lr_min = 1e-6;
  h.lr_max = 1e-5;
  h.lr_steps = 3;
  h.seed = 1;

  const auto st = adsq::train(data.train, s, h);

  const auto queries = adsq::pack(adsq::encode_queries(data.query.features, st.imgx, st.imgy));
  const auto db = adsq::pack(adsq::encode_queries(data.train.features, st.imgx, st.imgy));
  const adsq::RelevanceJudge judge(data.query.labels, data.train.labels);

  std::cout << "rounds trained: " << st.rounds << '\n';
  std::cout << "mAP@100:        " << adsq::mean_ap(queries, db, judge, 100) << '\n';
  std::cout << "P@H<=2:         " << adsq::mean_precision_at_hamming2(queries, db, judge) << '\n';
  const auto top = adsq::search_topk(queries.row(0), db, 5);
  std::cout << "query 0 top-5:  ";
  for (auto i : top) std::cout << i << ' ';
  std::cout << '\n';
}
