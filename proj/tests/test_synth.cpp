#include <gtest/gtest.h>

#include "adsq/synth.hpp"

using namespace adsq;

TEST(Synth, SameSeedBitIdentical) {
  SynthSpec spec;
  spec.multilabel_overlap = 0.3;
  const auto a = generate(spec);
  const auto b = generate(spec);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.train.labels, b.train.labels);
  EXPECT_EQ(a.query.features, b.query.features);
  spec.seed = 8;
  EXPECT_NE(generate(spec).train.features, a.train.features);
}

TEST(Synth, ShapesAndClassMajorOrder) {
  SynthSpec spec;
  const auto d = generate(spec);
  EXPECT_EQ(d.train.size(), 400);
  EXPECT_EQ(d.train.dim(), 32);
  EXPECT_EQ(d.query.size(), 100);
  EXPECT_EQ(d.train.classes(), 4);
  for (Index i = 0; i < d.train.size(); ++i) EXPECT_EQ(d.train.labels(i, i / 100), 1);
}

TEST(Synth, TightClustersAreNearestCenterSeparable) {
  SynthSpec spec;
  spec.cluster_spread = 1e-6;
  const auto d = generate(spec);
  for (Index i = 0; i < d.train.size(); ++i) {
    Index best = 0;
    (d.centers.rowwise() - d.train.features.row(i)).rowwise().squaredNorm().minCoeff(&best);
    EXPECT_EQ(best, d.train_class[static_cast<std::size_t>(i)]);
  }
}

TEST(Synth, SingleLabelGivesBlockDiagonalSimilarity) {
  SynthSpec spec;
  spec.per_class = 10;
  const auto d = generate(spec);
  const auto s = build_similarity(d.train.labels);
  for (Index i = 0; i < 40; ++i) {
    EXPECT_EQ(d.train.labels.row(i).cast<int>().sum(), 1);
    for (Index j = 0; j < 40; ++j) EXPECT_EQ(s.similar(i, j), i / 10 == j / 10);
  }
}

TEST(Synth, OverlapAddsOneExtraLabel) {
  SynthSpec spec;
  spec.multilabel_overlap = 1.0;
  const auto d = generate(spec);
  for (Index i = 0; i < d.train.size(); ++i) EXPECT_EQ(d.train.labels.row(i).cast<int>().sum(), 2);
}

TEST(Synth, SplitsAreDisjointDraws) {
  const auto d = generate(SynthSpec{});
  for (Index q = 0; q < d.query.size(); ++q)
    for (Index i = 0; i < d.train.size(); ++i) ASSERT_NE(d.query.features.row(q), d.train.features.row(i));
}

TEST(Synth, NonzeroLabelRowsAndFiniteFeatures) {
  SynthSpec spec;
  spec.multilabel_overlap = 0.5;
  const auto d = generate(spec);
  HyperParams h;
  EXPECT_TRUE(validate_dataset(d.train, h).empty());
}

TEST(Synth, InvalidSpecs) {
  SynthSpec one;
  one.classes = 1;
  EXPECT_THROW(generate(one), ConfigError);
  SynthSpec flat;
  flat.cluster_spread = 0.0;
  EXPECT_THROW(generate(flat), ConfigError);
  SynthSpec overlap;
  overlap.multilabel_overlap = 1.5;
  EXPECT_THROW(generate(overlap), ConfigError);
}

TEST(Synth, FeaturesSurviveFileRoundTrip) {
  const auto d = generate(SynthSpec{});
  const auto path = (std::filesystem::temp_directory_path() / "adsq_synth_roundtrip.feat").string();
  save_features(path, d.train.features);
  EXPECT_EQ(load_features(path), d.train.features);
  std::filesystem::remove(path);
}
