#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace freqdoor;
using namespace testing_support;

namespace {

std::vector<Image> faces(int n, int size, std::uint64_t seed) {
  std::vector<Image> v;
  for (int i = 0; i < n; ++i) v.push_back(quantize8(synth_face(size, 3, derive_seed(seed, std::uint64_t(i)))));
  return v;
}

template <class T>
RestorationModel<T> identity_model() {
  RestorationModel<T> m({3, 4, true, 1});
  for (auto& v : m.params()["dec.head.w"].vec()) v = T(0);
  for (auto& v : m.params()["dec.head.b"].vec()) v = T(0);
  return m;
}

// Channels whose weight row and bias are all zero, as (layer, channel).
std::set<std::pair<std::string, int>> zeroed_channels(const RestorationModel<float>& m) {
  std::set<std::pair<std::string, int>> out;
  for (const auto& name : RestorationModel<float>::prunable_layers()) {
    const auto& conv = m.layer(name);
    const auto& w = m.params()[conv.w];
    const std::size_t row = std::size_t(w.height()) * std::size_t(w.width());
    for (int c = 0; c < w.channels(); ++c) {
      bool zero = m.params()[conv.b][std::size_t(c)] == 0.0f;
      for (std::size_t k = 0; k < row && zero; ++k) zero = w[std::size_t(c) * row + k] == 0.0f;
      if (zero) out.insert({name, c});
    }
  }
  return out;
}

std::size_t prunable_channel_count(const RestorationModel<float>& m) {
  std::size_t n = 0;
  for (const auto& name : RestorationModel<float>::prunable_layers()) n += std::size_t(m.params()[m.layer(name).w].channels());
  return n;
}

}  // namespace

// ---------------------------------------------------------------- fine_prune

TEST(FinePrune, RatioZeroIsBitwiseNoOp) {
  const RestorationModel<float> m({3, 8, true, 4});
  const auto pruned = fine_prune(m, faces(4, 32, 1), 0.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image in = random_image(24, 24, 3, 500 + s);
    ASSERT_EQ(pruned.restore(in), m.restore(in)) << "input " << s;
  }
}

TEST(FinePrune, RatioOneMatchesHandZeroedModel) {
  for (bool residual : {true, false}) {
    const RestorationModel<float> m({3, 8, residual, 5});
    RestorationModel<float> hand = m;
    for (const auto& name : RestorationModel<float>::prunable_layers()) {
      const auto& conv = hand.layer(name);
      for (auto& v : hand.params()[conv.w].vec()) v = 0.0f;
      for (auto& v : hand.params()[conv.b].vec()) v = 0.0f;
    }
    const auto pruned = fine_prune(m, faces(3, 32, 2), 1.0);
    EXPECT_EQ(zeroed_channels(pruned).size(), prunable_channel_count(m));
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Image in = random_image(32, 32, 3, 600 + s);
      ASSERT_EQ(pruned.restore(in), hand.restore(in));
    }
  }
}

TEST(FinePrune, PrunedSetsAreNested) {
  const RestorationModel<float> m({3, 8, true, 6});
  const auto calib = faces(4, 32, 3);
  std::set<std::pair<std::string, int>> prev;
  for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const auto z = zeroed_channels(fine_prune(m, calib, r));
    EXPECT_EQ(z.size(), pruned_count(prunable_channel_count(m), r));
    EXPECT_TRUE(std::includes(z.begin(), z.end(), prev.begin(), prev.end())) << "ratio " << r;
    prev = z;
  }
}

TEST(FinePrune, RanksByMeanAbsoluteActivation) {
  const RestorationModel<float> m({3, 8, true, 7});
  const auto ranking = prune_ranking(channel_activations(m, faces(3, 32, 4)));
  ASSERT_EQ(ranking.size(), prunable_channel_count(m));
  for (std::size_t i = 1; i < ranking.size(); ++i) ASSERT_LE(ranking[i - 1].activation, ranking[i].activation);
}

TEST(FinePrune, OriginalUnmodified) {
  const RestorationModel<float> m({3, 8, true, 8});
  const RestorationModel<float> copy = m;
  fine_prune(m, faces(2, 32, 5), 0.8);
  for (std::size_t t = 0; t < m.params().count(); ++t) ASSERT_EQ(m.params()[t], copy.params()[t]);
}

TEST(FinePrune, InvalidArguments) {
  const RestorationModel<float> m({3, 4, true, 1});
  EXPECT_THROW(fine_prune(m, {}, 0.5), ParameterError);
  EXPECT_THROW(fine_prune(m, faces(1, 32, 1), 1.5), ParameterError);
  PruneSchedule s;
  s.ratios = {0.2, 0.1};
  EXPECT_THROW(s.validate(), ParameterError);
  s.ratios = {};
  EXPECT_THROW(s.validate(), ParameterError);
}

TEST(PruneSweep, RatioZeroReproducesUnprunedMetrics) {
  const RestorationModel<float> clean({3, 4, true, 1}), victim({3, 4, true, 2});
  const auto in = faces(6, 32, 6);
  const auto refs = make_refs(clean, in);
  std::vector<Image> pois;
  for (const auto& img : in) pois.push_back(degradation_target(img, 0.1));
  PruneSchedule s;
  s.ratios = {0.0, 0.5, 1.0};
  const auto sweep = prune_sweep(victim, faces(3, 32, 7), s, in, pois, refs);
  ASSERT_EQ(sweep.size(), 3u);
  EXPECT_EQ(sweep[0].pruned, 0u);
  EXPECT_EQ(sweep[0].ba, benign_accuracy(victim, in, refs));
  EXPECT_EQ(sweep[0].asr, attack_success_rate(victim, pois, refs));
}

// ---------------------------------------------------------------- STRIP

TEST(Strip, IdentityModelHasZeroEntropy) {
  const auto m = identity_model<float>();
  const auto pool = faces(12, 32, 8);
  EXPECT_EQ(strip_entropy(m, random_image(32, 32, 3, 1), pool, StripConfig{}), 0.0);
}

TEST(Strip, UniformHistogramIsEightBits) {
  std::vector<double> v;
  for (int b = 0; b < 256; ++b)
    for (int k = 0; k < 3; ++k) v.push_back(-1.0 + (b + 0.25 + 0.25 * k) * 2.0 / 256.0);
  EXPECT_NEAR(histogram_entropy(v, 256), 8.0, 1e-12);
  EXPECT_EQ(histogram_entropy({0.3, 0.3, 0.3}, 256), 0.0);
  EXPECT_NEAR(histogram_entropy({-0.9, 0.9}, 2), 1.0, 1e-15);
}

TEST(Strip, DeterministicAndInRange) {
  const RestorationModel<float> m({3, 4, true, 3});
  const auto pool = faces(15, 32, 9);
  StripConfig c;
  c.seed = 4;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image in = random_image(32, 32, 3, 40 + s);
    const double e = strip_entropy(m, in, pool, c);
    EXPECT_EQ(e, strip_entropy(m, in, pool, c));
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 8.0);
  }
}

TEST(Strip, BlendUsesDistinctSeededPoolImages) {
  // A model that outputs zeros makes the residual -blend, so the entropy
  // depends on which pool images were drawn.
  RestorationModel<float> m({3, 4, false, 1});
  for (auto& v : m.params()["dec.head.w"].vec()) v = 0.0f;
  for (auto& v : m.params()["dec.head.b"].vec()) v = 0.0f;
  std::vector<Image> pool = faces(11, 32, 10);
  for (int i = 0; i < 5; ++i) pool.push_back(constant_image(32, 32, 3, 0.1 * i));
  const Image in = random_image(32, 32, 3, 2);
  StripConfig c;
  c.overlays = 3;
  std::set<double> seen;
  for (std::uint64_t s = 0; s < 8; ++s) {
    c.seed = s;
    seen.insert(strip_entropy(m, in, pool, c));
  }
  EXPECT_GT(seen.size(), 1u);
}

TEST(Strip, PoolTooSmall) {
  const RestorationModel<float> m({3, 4, true, 3});
  EXPECT_THROW(strip_entropy(m, random_image(32, 32, 3, 1), faces(9, 32, 1), StripConfig{}), ParameterError);
}

TEST(Strip, InvalidConfig) {
  StripConfig c;
  c.overlays = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.blend = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.bins = 1;
  EXPECT_THROW(c.validate(), ParameterError);
}

// ---------------------------------------------------------------- overlap

TEST(Overlap, IdenticalAndDisjoint) {
  const std::vector<double> a{0.1, 0.2, 0.3, 0.4}, b{5.0, 6.0, 7.0};
  EXPECT_NEAR(overlap_coefficient(a, a), 1.0, 1e-12);
  EXPECT_EQ(overlap_coefficient(a, b), 0.0);
  EXPECT_EQ(overlap_coefficient({2.0, 2.0}, {2.0}), 1.0);
  EXPECT_THROW(overlap_coefficient({}, a), ParameterError);
}

TEST(Overlap, HalfShared) {
  // Two bins: a puts all mass in the low bin; b splits evenly.
  EXPECT_NEAR(overlap_coefficient({0.0, 0.0}, {0.0, 1.0}, 2), 0.5, 1e-12);
}

// ---------------------------------------------------------------- saliency

TEST(Saliency, ConstantOutputGivesZeroMap) {
  RestorationModel<double> m({3, 4, false, 2});
  for (auto& v : m.params()["dec.head.w"].vec()) v = 0.0;
  for (auto& v : m.params()["dec.head.b"].vec()) v = 0.3;
  const Image s = saliency_map(m, random_image(16, 16, 3, 1));
  ASSERT_EQ(s.channels(), 1);
  for (std::size_t i = 0; i < s.size(); ++i) ASSERT_EQ(s[i], 0.0);
}

TEST(Saliency, IdentityGradientIsNormalisedInput) {
  const auto m = identity_model<double>();
  const Image x = random_image(12, 12, 3, 3, 0.05, 0.95);
  const auto g = output_norm_gradient(m, x);
  double n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) n += x[i] * x[i];
  n = std::sqrt(n);
  for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(g[i], x[i] / n, 1e-4);
}

TEST(Saliency, MapInUnitRange) {
  const RestorationModel<double> m({3, 4, true, 4});
  const Image s = saliency_map(m, random_image(16, 16, 3, 5));
  double lo = 1, hi = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    lo = std::min(lo, s[i]);
    hi = std::max(hi, s[i]);
  }
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
}

TEST(Saliency, HeadScaleInvariance) {
  RestorationModel<double> m({3, 4, false, 9});
  const Image x = smooth_image(20, 20, 3, 6);
  const Image a = saliency_map(m, x);
  for (auto& v : m.params()["dec.head.w"].vec()) v *= 2.5;
  for (auto& v : m.params()["dec.head.b"].vec()) v *= 2.5;
  const Image b = saliency_map(m, x);
  auto argmax = [](const Image& s) {
    std::size_t k = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i] > s[k]) k = i;
    return k;
  };
  EXPECT_EQ(argmax(a), argmax(b));
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-9);
}
