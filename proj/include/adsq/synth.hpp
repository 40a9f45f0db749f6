#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adsq/data_model.hpp"
#include "adsq/errors.hpp"

namespace adsq {

struct SynthSpec {
  int classes = 4;
  int dim = 32;
  int per_class = 100;
  int queries_per_class = 25;
  double cluster_spread = 1.0;
  double center_scale = 1.0;
  double multilabel_overlap = 0.0;
  std::uint64_t seed = 7;
};

struct SynthData {
  Dataset train;
  Dataset query;
  Matrix centers;                 // classes x dim
  std::vector<int> train_class;   // primary class per train row
  std::vector<int> query_class;
};

namespace detail {

inline void draw_split(const SynthSpec& spec, const Matrix& centers, int per_class, std::mt19937_64& rng,
                       Dataset& out, std::vector<int>& cls) {
  std::normal_distribution<double> noise(0.0, spec.cluster_spread);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, spec.classes - 2);
  const Index n = static_cast<Index>(spec.classes) * per_class;
  out.features.resize(n, spec.dim);
  out.labels = LabelMatrix::Zero(n, spec.classes);
  Index row = 0;
  for (int c = 0; c < spec.classes; ++c) {
    for (int k = 0; k < per_class; ++k, ++row) {
      for (int d = 0; d < spec.dim; ++d) {
        // Stored at binary32 precision so a file round trip is lossless.
        out.features(row, d) = static_cast<float>(centers(c, d) + noise(rng));
      }
      out.labels(row, c) = 1;
      if (coin(rng) < spec.multilabel_overlap) {
        int extra = other(rng);
        if (extra >= c) ++extra;
        out.labels(row, extra) = 1;
      }
      cls.push_back(c);
    }
  }
}

}  // namespace detail

// Gaussian class clusters. Train and query splits are independent draws from
// the same distribution, rows grouped by class.
inline SynthData generate(const SynthSpec& spec) {
  if (spec.classes < 2) throw ConfigError("synth: classes must be >= 2");
  if (!(spec.cluster_spread > 0.0)) throw ConfigError("synth: spread must be > 0");
  if (spec.dim < 1 || spec.per_class < 1 || spec.queries_per_class < 0) {
    throw ConfigError("synth: dim and per_class must be positive");
  }
  if (!(spec.multilabel_overlap >= 0.0 && spec.multilabel_overlap <= 1.0)) {
    throw ConfigError("synth: overlap must lie in [0, 1]");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> center(-spec.center_scale, spec.center_scale);
  SynthData out;
  out.centers.resize(spec.classes, spec.dim);
  for (int c = 0; c < spec.classes; ++c)
    for (int d = 0; d < spec.dim; ++d) out.centers(c, d) = center(rng);
  detail::draw_split(spec, out.centers, spec.per_class, rng, out.train, out.train_class);
  detail::draw_split(spec, out.centers, spec.queries_per_class, rng, out.query, out.query_class);
  return out;
}

}  // namespace adsq
