#include <gtest/gtest.h>

#include "support.hpp"

using namespace freqdoor;
using namespace testing_support;

// ---------------------------------------------------------------- Image

TEST(Image, RejectsInvalidShapesAndValues) {
  EXPECT_THROW(Image(4, 16, 3).validate(), ParameterError);
  EXPECT_THROW(Image(16, 16, 2).validate(), ParameterError);
  Image img = constant_image(8, 8, 1, 0.5);
  EXPECT_NO_THROW(img.validate());
  img[3] = 1.5;
  EXPECT_THROW(img.validate(), ParameterError);
  img[3] = std::nan("");
  EXPECT_THROW(img.validate(), ParameterError);
}

TEST(Image, PngRoundTripIsEightBitQuantisation) {
  const auto dir = scratch_dir("png");
  const Image img = random_image(12, 10, 3, 5);
  save_png(img, dir / "a.png");
  const Image back = load_png(dir / "a.png");
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_DOUBLE_EQ(back[i], std::round(img[i] * 255.0) / 255.0);
  const Image gray = random_image(9, 9, 1, 6);
  save_png(gray, dir / "g.png");
  EXPECT_EQ(load_png(dir / "g.png").channels(), 1);
}

TEST(Image, LoadMissingFileIsIoError) { EXPECT_THROW(load_png("/nonexistent/x.png"), IoError); }

// ---------------------------------------------------------------- degrade

TEST(Degrade, IdentityPipeline) {
  const Image img = random_image(16, 16, 3, 1);
  const Image out = degrade(img, {0.0, 0.0, 1.0, 9});
  for (std::size_t i = 0; i < img.size(); ++i) ASSERT_EQ(out[i], img[i]);
}

TEST(Degrade, ConstantIsFixedPoint) {
  const Image img = constant_image(20, 24, 3, 0.5);
  for (double sigma : {0.5, 1.0, 2.5})
    for (double f : {0.25, 0.5, 0.8}) {
      const Image out = degrade(img, {sigma, 0.0, f, 3});
      for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], 0.5, 1e-12);
    }
}

TEST(Degrade, CheckerboardMatchesPixelLoopOracle) {
  Image board(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) board.at(y, x, 0) = (x + y) % 2;
  const Image out = degrade(board, {1.0, 0.0, 0.5, 0});
  Image ref = naive_resize(naive_resize(naive_blur(board, 1.0), 8, 8), 16, 16);
  ref.clamp01();
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-12);
}

TEST(Degrade, DeterministicGivenSeedAndNoiseDependsOnSeed) {
  const Image img = smooth_image(32, 32, 3, 2);
  const DegradationConfig a{1.5, 0.02, 0.5, 11}, b{1.5, 0.02, 0.5, 12};
  EXPECT_EQ(degrade(img, a).tensor(), degrade(img, a).tensor());
  EXPECT_GT(max_abs_diff(degrade(img, a), degrade(img, b)), 0.0);
}

TEST(Degrade, InvalidConfigRejected) {
  const Image img = constant_image(16, 16, 1, 0.2);
  EXPECT_THROW(degrade(img, {-1.0, 0.0, 0.5, 0}), ParameterError);
  EXPECT_THROW(degrade(img, {1.0, -0.1, 0.5, 0}), ParameterError);
  EXPECT_THROW(degrade(img, {1.0, 0.0, 0.0, 0}), ParameterError);
  EXPECT_THROW(degrade(img, {1.0, 0.0, 1.5, 0}), ParameterError);
}

// ---------------------------------------------------------------- degradation_target

TEST(DegradationTarget, ConstantPreserved) {
  const Image img = constant_image(40, 40, 3, 0.37);
  const Image out = degradation_target(img, 0.1);
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], 0.37, 1e-12);
}

TEST(DegradationTarget, OneByOneReductionReplicated) {
  const Image img = random_image(10, 10, 3, 4);
  const Image out = degradation_target(img, 0.1);  // 10 * 0.1 = 1 pixel
  for (int c = 0; c < 3; ++c) {
    const double v = naive_resize(img, 1, 1).at(0, 0, c);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) ASSERT_NEAR(out.at(y, x, c), v, 1e-12);
  }
}

TEST(DegradationTarget, RemovesHighFrequencyEnergy) {
  auto high_energy = [](const Image& img) {
    const auto [lo, hi] = split_frequency(dft2(img), {0.25});
    double e = 0;
    for (const auto& z : hi.data) e += std::norm(z);
    return e;
  };
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image img = random_image(100, 100, 1, 100 + s);
    EXPECT_LT(high_energy(degradation_target(img, 0.1)), high_energy(img)) << "seed " << s;
  }
}

// Plain half-pixel bilinear is not exactly idempotent: the second pass
// interpolates across the kinks of the first upsample. Measured on the
// synthetic face domain the change is 1.7e-3..4.4e-3 MAE, so the bound
// asserted here is 5e-3 and at least 5x below the first pass's change.
TEST(DegradationTarget, NearlyIdempotentOnFaceDomain) {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const Image img = synth_face(64, 3, derive_seed(7, s));
    const Image once = degradation_target(img, 0.1);
    const Image twice = degradation_target(once, 0.1);
    const double second = mean_abs_diff(once, twice);
    EXPECT_LT(second, 5e-3) << "seed " << s;
    EXPECT_LT(5.0 * second, mean_abs_diff(img, once)) << "seed " << s;
  }
}

TEST(DegradationTarget, InvalidScale) {
  const Image img = constant_image(16, 16, 1, 0.1);
  EXPECT_THROW(degradation_target(img, 0.0), ParameterError);
  EXPECT_THROW(degradation_target(img, 1.0), ParameterError);
  EXPECT_THROW(degradation_target(img, 0.05), ParameterError);  // floor(0.8) = 0
}

// ---------------------------------------------------------------- DFT

TEST(Dft, ZeroImageGivesZeroSpectrum) {
  const auto spec = dft2(Image(8, 8, 3));
  for (const auto& z : spec.data) ASSERT_EQ(std::abs(z), 0.0);
}

TEST(Dft, ImpulseHasConstantAmplitude) {
  Image img(8, 8, 1);
  img.at(0, 0, 0) = 1.0;
  for (const auto& z : dft2(img).data) ASSERT_NEAR(std::abs(z), 1.0, 1e-12);
}

TEST(Dft, RoundTripAllShapes) {
  std::uint64_t seed = 0;
  for (int h : {8, 16, 32, 64})
    for (int w : {8, 16, 32, 64}) {
      const Image img = random_image(h, w, 3, ++seed);
      EXPECT_LE(max_abs_diff(idft2(dft2(img)), img), 1e-6) << h << "x" << w;
    }
}

TEST(Dft, OddSizesRoundTrip) {
  const Image img = random_image(9, 15, 1, 3);
  EXPECT_LE(max_abs_diff(idft2(dft2(img)), img), 1e-6);
}

TEST(Dft, Parseval) {
  const Image img = random_image(8, 8, 1, 77);
  double px = 0, sx = 0;
  for (std::size_t i = 0; i < img.size(); ++i) px += img[i] * img[i];
  for (const auto& z : dft2(img).data) sx += std::norm(z);
  EXPECT_NEAR(px, sx / 64.0, 1e-10);
}

TEST(Dft, MatchesNaiveCentredDft) {
  const Image img = random_image(6, 10, 2, 8);
  const auto spec = dft2(img);
  for (int c = 0; c < 2; ++c) {
    const auto ref = naive_dft_centered(img, c);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 10; ++x) ASSERT_LT(std::abs(spec.at(y, x, c) - ref[std::size_t(y) * 10 + x]), 1e-9);
  }
}

TEST(Dft, Linear) {
  const Image a = random_image(16, 16, 1, 1), b = random_image(16, 16, 1, 2);
  Image s(16, 16, 1);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.3 * a[i] + 0.7 * b[i];
  const auto sa = dft2(a), sb = dft2(b), ss = dft2(s);
  for (std::size_t i = 0; i < ss.data.size(); ++i) ASSERT_LT(std::abs(ss.data[i] - (0.3 * sa.data[i] + 0.7 * sb.data[i])), 1e-10);
}

TEST(Dft, IdftClampsOnlyWhenAsked) {
  auto spec = dft2(constant_image(8, 8, 1, 0.5));
  spec.at(4, 4, 0) *= 3.0;  // DC x3 -> 1.5 everywhere
  EXPECT_NEAR(idft2(spec)[0], 1.5, 1e-12);
  EXPECT_DOUBLE_EQ(idft2(spec, true)[0], 1.0);
}

// ---------------------------------------------------------------- split_frequency

TEST(SplitFrequency, FullMask) {
  const auto spec = dft2(random_image(16, 16, 3, 3));
  const auto [lo, hi] = split_frequency(spec, {1.0});
  EXPECT_EQ(lo, spec);
  for (const auto& z : hi.data) ASSERT_EQ(std::abs(z), 0.0);
}

TEST(SplitFrequency, PartitionIsBitExact) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int h = 8 + 4 * (t % 5), w = 8 + 4 * ((t / 5) % 5);
    const auto spec = dft2(random_image(h, w, 1 + 2 * (t % 2), 1000 + t));
    const auto [lo, hi] = split_frequency(spec, {u(rng)});
    for (std::size_t i = 0; i < spec.data.size(); ++i) ASSERT_EQ(lo.data[i] + hi.data[i], spec.data[i]);
  }
}

TEST(SplitFrequency, HalfMaskOn8x8HasSixteenOnes) {
  const auto mask = low_band_mask(8, 8, 0.5);
  EXPECT_EQ(std::count(mask.begin(), mask.end(), 1), 16);
  const auto spec = dft2(random_image(8, 8, 3, 9));
  const auto [lo, hi] = split_frequency(spec, {0.5});
  for (int c = 0; c < 3; ++c) {
    int n = 0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        n += lo.at(y, x, c) != cplx(0, 0);
        EXPECT_EQ(lo.at(y, x, c) != cplx(0, 0), in_low_band(y, x, 8, 8, 0.5));
      }
    EXPECT_EQ(n, 16);
  }
}

TEST(SplitFrequency, MaskContainsDcAndRoundingRule) {
  for (int n : {8, 15, 16, 64})
    for (double beta : {0.01, 0.15, 0.25, 0.5}) {
      const auto m = low_band_mask(n, n, beta);
      EXPECT_EQ(m[std::size_t(n / 2) * n + n / 2], 1);
      const long side = std::max(1L, std::lround(beta * n));
      EXPECT_EQ(std::count(m.begin(), m.end(), 1), side * side);
    }
}

TEST(SplitFrequency, RejectsInvalidBetaAndNaturalLayout) {
  auto spec = dft2(random_image(8, 8, 1, 1));
  EXPECT_THROW(split_frequency(spec, {0.0}), ParameterError);
  EXPECT_THROW(split_frequency(spec, {1.2}), ParameterError);
  spec.centered = false;
  EXPECT_THROW(split_frequency(spec, {0.5}), ParameterError);
}

// ---------------------------------------------------------------- frequency_distance

TEST(FrequencyDistance, SelfIsZero) {
  const Image a = random_image(16, 16, 3, 2);
  const auto d = frequency_distance(a, a, {});
  EXPECT_EQ(d.low_mse, 0.0);
  EXPECT_EQ(d.high_mse, 0.0);
}

TEST(FrequencyDistance, Symmetric) {
  const Image a = random_image(16, 16, 3, 2), b = random_image(16, 16, 3, 3);
  const auto d1 = frequency_distance(a, b, {0.25}), d2 = frequency_distance(b, a, {0.25});
  EXPECT_EQ(d1.low_mse, d2.low_mse);
  EXPECT_EQ(d1.high_mse, d2.high_mse);
}

TEST(FrequencyDistance, MatchesNaiveDftOracle) {
  const Image a = random_image(16, 16, 1, 21), b = random_image(16, 16, 1, 22);
  const double beta = 0.15;
  const auto sa = naive_dft_centered(a, 0), sb = naive_dft_centered(b, 0);
  double lo = 0, hi = 0;
  int nl = 0, nh = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const std::size_t i = std::size_t(y) * 16 + x;
      const double d = std::abs(sa[i]) - std::abs(sb[i]);
      if (in_low_band(y, x, 16, 16, beta)) {
        lo += d * d;
        ++nl;
      } else {
        hi += d * d;
        ++nh;
      }
    }
  const auto r = frequency_distance(a, b, {beta});
  EXPECT_NEAR(r.low_mse, lo / nl, 1e-9 * std::max(1.0, lo / nl));
  EXPECT_NEAR(r.high_mse, hi / nh, 1e-9 * std::max(1.0, hi / nh));
}

TEST(FrequencyDistance, ShapeMismatch) {
  EXPECT_THROW(frequency_distance(Image(8, 8, 1), Image(8, 8, 3), {}), ParameterError);
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, IdentityValues) {
  const Image a = random_image(32, 32, 3, 1);
  EXPECT_EQ(psnr(a, a), 100.0);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_EQ(perceptual_distance(a, a), 0.0);
}

TEST(Metrics, UniformShiftGivesTwentyDb) {
  const Image a = random_image(16, 16, 3, 1, 0.0, 0.8);
  Image b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += 0.1;
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Metrics, PsnrDecreasesWithNoise) {
  const Image a = constant_image(32, 32, 3, 0.5);
  double prev = 1e9;
  for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    Rng rng(3);
    std::normal_distribution<double> n(0, amp);
    Image b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += n(rng);
    const double p = psnr(a, b);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Metrics, SsimBoundedAndDropsWithNoise) {
  const Image a = smooth_image(32, 32, 3, 5);
  const Image b = random_image(32, 32, 3, 6);
  const double s = ssim(a, b);
  EXPECT_GE(s, -1.0);
  EXPECT_LT(s, 0.5);
  Image inv = a;
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - a[i];
  EXPECT_LT(ssim(a, inv), 0.0);
}

TEST(Metrics, ShapeMismatch) {
  const Image a(16, 16, 3), b(16, 8, 3);
  EXPECT_THROW(psnr(a, b), ParameterError);
  EXPECT_THROW(ssim(a, b), ParameterError);
  EXPECT_THROW(perceptual_distance(a, b), ParameterError);
}

namespace {
// Independent forward pass of the frozen extractor using only its weights.
double oracle_perceptual(const Image& a, const Image& b) {
  const auto& layers = PerceptualExtractor::instance().layers();
  auto run = [&](const Image& img) {
    std::vector<std::vector<double>> maps;
    int h = img.height(), w = img.width(), c = 3;
    std::vector<double> x(std::size_t(3) * h * w);
    for (int k = 0; k < 3; ++k)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) x[(std::size_t(k) * h + y) * w + xx] = 2 * img.at(y, xx, img.channels() == 1 ? 0 : k) - 1;
    for (const auto& L : layers) {
      const int oh = (h + 1) / 2, ow = (w + 1) / 2;
      std::vector<double> o(std::size_t(L.out) * oh * ow);
      for (int oc = 0; oc < L.out; ++oc)
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx) {
            double s = 0;
            for (int ic = 0; ic < c; ++ic)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int iy = 2 * y + ky - 1, ix = 2 * xx + kx - 1;
                  if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                    s += L.weight[((std::size_t(oc) * c + ic) * 3 + ky) * 3 + kx] * x[(std::size_t(ic) * h + iy) * w + ix];
                }
            o[(std::size_t(oc) * oh + y) * ow + xx] = std::max(0.0, s);
          }
      x = o;
      h = oh;
      w = ow;
      c = L.out;
      std::vector<double> nmap = x;
      for (int p = 0; p < h * w; ++p) {
        double n2 = 0;
        for (int k = 0; k < c; ++k) n2 += x[std::size_t(k) * h * w + p] * x[std::size_t(k) * h * w + p];
        for (int k = 0; k < c; ++k) nmap[std::size_t(k) * h * w + p] /= std::sqrt(n2) + 1e-10;
      }
      maps.push_back(nmap);
    }
    return std::pair{maps, layers.size()};
  };
  const auto [ma, n] = run(a);
  const auto [mb, n2] = run(b);
  double total = 0;
  int h = a.height(), w = a.width();
  for (std::size_t l = 0; l < n; ++l) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
    double s = 0;
    for (std::size_t i = 0; i < ma[l].size(); ++i) s += (ma[l][i] - mb[l][i]) * (ma[l][i] - mb[l][i]);
    total += s / (h * w);
  }
  return total / double(n);
}
}  // namespace

TEST(Metrics, PerceptualMatchesScalarOracle) {
  const Image a = random_image(24, 20, 3, 41), b = random_image(24, 20, 3, 42);
  EXPECT_NEAR(perceptual_distance(a, b), oracle_perceptual(a, b), 1e-12);
  const Image g1 = random_image(16, 16, 1, 43), g2 = random_image(16, 16, 1, 44);
  EXPECT_NEAR(perceptual_distance(g1, g2), oracle_perceptual(g1, g2), 1e-12);
}

TEST(Metrics, PerceptualFrozenWidthsAndSeed) {
  const auto& layers = PerceptualExtractor::instance().layers();
  ASSERT_EQ(layers.size(), 4u);
  EXPECT_EQ(layers[0].out, 8);
  EXPECT_EQ(layers[1].out, 16);
  EXPECT_EQ(layers[2].out, 32);
  EXPECT_EQ(layers[3].out, 64);
  const Image a = random_image(16, 16, 3, 1), b = random_image(16, 16, 3, 2);
  EXPECT_EQ(perceptual_distance(a, b), perceptual_distance(a, b));
  EXPECT_GT(perceptual_distance(a, b), 0.0);
}

// ---------------------------------------------------------------- resampling helpers

TEST(Resample, BilinearMatchesOracle) {
  const Image img = random_image(13, 17, 3, 12);
  for (auto [h, w] : {std::pair{5, 7}, {26, 34}, {13, 9}}) {
    const Image a = resize_bilinear(img, h, w), b = naive_resize(img, h, w);
    EXPECT_LT(max_abs_diff(a, b), 1e-12);
  }
}

TEST(Resample, BlurMatchesFull2dSum) {
  const Image img = random_image(12, 14, 2, 13);
  EXPECT_LT(max_abs_diff(gaussian_blur(img, 1.3), naive_blur(img, 1.3)), 1e-12);
}
