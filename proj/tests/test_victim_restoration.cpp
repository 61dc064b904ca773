#include <gtest/gtest.h>

#include <set>

#include "gradcheck.hpp"

using namespace freqdoor;
using namespace testing_support;

namespace {

RestorationConfig tiny_arch(std::uint64_t seed = 1, bool residual = true) { return {3, 4, residual, seed}; }

Image gray2x2(double a, double b, double c, double d) {
  Image img(2, 2, 1);
  img.at(0, 0, 0) = a;
  img.at(0, 1, 0) = b;
  img.at(1, 0, 0) = c;
  img.at(1, 1, 0) = d;
  return img;
}

Tensor<double> relu(Tensor<double> t) {
  for (auto& v : t.vec()) v = std::max(v, 0.0);
  return t;
}

Tensor<double> plus(Tensor<double> a, const Tensor<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

// Nearest-neighbour upsample with floor(i * src / dst) source indices.
Tensor<double> upsample(const Tensor<double>& x, int h, int w) {
  Tensor<double> out(x.channels(), h, w);
  for (int c = 0; c < x.channels(); ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(c, i, j) = x.at(c, i * x.height() / h, j * x.width() / w);
  return out;
}

Tensor<double> conv(const RestorationModel<double>& m, const std::string& name, const Tensor<double>& x, int stride) {
  const auto& ps = m.params();
  const auto& w = ps[name + ".w"];
  const int k = int(std::lround(std::sqrt(double(w.width()))));
  return naive_conv(x.cast<double>(), w, ps[name + ".b"], stride, k / 2);
}

// Scalar-loop forward pass of the restoration network.
Image oracle_restore(const RestorationModel<double>& m, const Image& img) {
  const auto x = img.as<double>();
  const auto e1 = relu(conv(m, "enc.e1", x, 1));
  const auto e2 = relu(conv(m, "enc.e2", e1, 2));
  const auto e3 = relu(conv(m, "enc.e3", e2, 2));
  const auto bott = relu(conv(m, "dec.bott", e3, 1));
  const auto r3 = conv(m, "dec.red3", bott, 1);
  const auto d2 = relu(conv(m, "dec.d2", plus(upsample(r3, e2.height(), e2.width()), e2), 1));
  const auto r2 = conv(m, "dec.red2", d2, 1);
  const auto d1 = relu(conv(m, "dec.d1", plus(upsample(r2, e1.height(), e1.width()), e1), 1));
  auto y = conv(m, "dec.head", d1, 1);
  if (m.config().residual) y = plus(y, x);
  for (auto& v : y.vec()) v = std::clamp(v, 0.0, 1.0);
  return Image::from(y);
}

PairedSet tiny_pairs(int n, int size, std::uint64_t seed) {
  PairedSet d;
  for (int i = 0; i < n; ++i) {
    const Image gt = quantize8(synth_face(size, 3, derive_seed(seed, std::uint64_t(i))));
    DegradationConfig dc;
    dc.seed = derive_seed(seed + 1, std::uint64_t(i));
    d.gt.push_back(gt);
    d.lq.push_back(quantize8(degrade(gt, dc)));
  }
  return d;
}

std::shared_ptr<const Injector<float>> small_injector(std::uint64_t seed) {
  InjectorConfig c;
  c.base_width = 4;
  c.residual_decoder_width = 4;
  c.seed = seed;
  return std::make_shared<Injector<float>>(c);
}

bool same_params(const ParamSet<float>& a, const ParamSet<float>& b) {
  if (a.count() != b.count()) return false;
  for (std::size_t t = 0; t < a.count(); ++t)
    if (!(a[t] == b[t])) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------- restore

TEST(Restore, ShapePreservedAndClamped) {
  const RestorationModel<float> m(tiny_arch());
  const Image in = random_image(20, 12, 3, 4);
  const Image out = m.restore(in);
  ASSERT_TRUE(out.same_shape(in));
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_GE(out[i], 0.0);
    ASSERT_LE(out[i], 1.0);
  }
}

TEST(Restore, ChannelMismatchIsParameterError) {
  const RestorationModel<float> m(tiny_arch());
  EXPECT_THROW(m.restore(random_image(16, 16, 1, 1)), ParameterError);
}

TEST(Restore, ZeroHeadPassesInputThrough) {
  RestorationModel<double> m(tiny_arch(3));
  auto& ps = m.params();
  for (auto& v : ps["dec.head.w"].vec()) v = 0.0;
  for (auto& v : ps["dec.head.b"].vec()) v = 0.0;
  const Image in = random_image(16, 16, 3, 5);
  const Image out = m.restore(in);
  for (std::size_t i = 0; i < in.size(); ++i) ASSERT_EQ(out[i], in[i]);

  // Interior weights no longer matter.
  for (auto& v : ps["dec.d1.w"].vec()) v *= -3.0;
  for (auto& v : ps["enc.e2.b"].vec()) v += 0.5;
  const Image out2 = m.restore(in);
  for (std::size_t i = 0; i < in.size(); ++i) ASSERT_EQ(out2[i], in[i]);
}

TEST(Restore, MatchesScalarLoopOracle) {
  for (bool residual : {true, false}) {
    const RestorationModel<double> m(tiny_arch(11, residual));
    const Image in = random_image(13, 10, 3, 12);
    const Image out = m.restore(in), ref = oracle_restore(m, in);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-12) << "residual " << residual;
  }
}

TEST(Restore, Deterministic) {
  const RestorationModel<float> m(tiny_arch(2));
  const Image in = random_image(16, 16, 3, 9);
  EXPECT_EQ(m.restore(in), m.restore(in));
}

// ---------------------------------------------------------------- losses

TEST(BackdoorLoss, ExactFitIsZero) {
  const TrainingSample s{random_image(4, 4, 3, 1), random_image(4, 4, 3, 2), random_image(4, 4, 3, 3),
                         random_image(4, 4, 3, 4), random_image(4, 4, 3, 5)};
  const auto l = backdoor_loss(s.gt, s.target, s.gt, s, BackdoorTrainConfig{});
  EXPECT_EQ(l.total, 0.0);
}

TEST(BackdoorLoss, DefaultWeights) {
  const BackdoorTrainConfig c;
  EXPECT_EQ(c.lambda1, 0.75);
  EXPECT_EQ(c.lambda2, 0.125);
  EXPECT_EQ(c.batch_size, 8);
  EXPECT_EQ(c.epochs, 20);
  EXPECT_EQ(c.learning_rate, 1e-3);
}

TEST(BackdoorLoss, HandComputed2x2) {
  TrainingSample s;
  s.input = gray2x2(0, 0, 0, 0);
  s.gt = gray2x2(0.5, 0.5, 0.5, 0.5);
  s.poisoned = s.input;
  s.pseudo = s.input;
  s.target = gray2x2(0.0, 0.25, 0.5, 1.0);
  const Image oc = gray2x2(0.5, 0.7, 0.1, 0.5);   // |diff| 0, .2, .4, 0 -> 0.15
  const Image op = gray2x2(0.5, 0.25, 0.5, 0.0);  // .5, 0, 0, 1 -> 0.375
  const Image oq = gray2x2(0.9, 0.9, 0.9, 0.9);   // .4 each -> 0.4
  const auto l = backdoor_loss(oc, op, oq, s, BackdoorTrainConfig{});
  EXPECT_NEAR(l.clean, 0.15, 1e-15);
  EXPECT_NEAR(l.poison, 0.375, 1e-15);
  EXPECT_NEAR(l.pseudo, 0.4, 1e-15);
  // 0.75 * 0.15 + 0.125 * 0.375 + 0.125 * 0.4 = 0.209375
  EXPECT_NEAR(l.total, 0.209375, 1e-15);
}

TEST(BackdoorLoss, DecompositionHolds) {
  BackdoorTrainConfig c;
  c.lambda1 = 0.3;
  c.lambda2 = 0.6;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const TrainingSample s{random_image(6, 5, 3, k), random_image(6, 5, 3, k + 100), random_image(6, 5, 3, k + 200),
                           random_image(6, 5, 3, k + 300), random_image(6, 5, 3, k + 400)};
    const auto l = backdoor_loss(random_image(6, 5, 3, k + 500), random_image(6, 5, 3, k + 600),
                                 random_image(6, 5, 3, k + 700), s, c);
    ASSERT_NEAR(l.total, 0.3 * l.clean + 0.6 * l.poison + 0.1 * l.pseudo, 1e-9);
  }
}

TEST(BackdoorLoss, WeightConstraints) {
  const TrainingSample s{random_image(2, 2, 1, 1), random_image(2, 2, 1, 2), random_image(2, 2, 1, 3),
                         random_image(2, 2, 1, 4), random_image(2, 2, 1, 5)};
  BackdoorTrainConfig c;
  c.lambda1 = 0.9;
  c.lambda2 = 0.2;
  EXPECT_THROW(backdoor_loss(s.gt, s.gt, s.gt, s, c), ParameterError);
  c.lambda1 = -0.1;
  c.lambda2 = 0.1;
  EXPECT_THROW(backdoor_loss(s.gt, s.gt, s.gt, s, c), ParameterError);
  c = {};
  c.mode = TrainMode::two_term;
  EXPECT_THROW(backdoor_loss(s.gt, s.gt, s.gt, s, c), ParameterError);
}

TEST(TwoTermLoss, HandComputed2x2) {
  TrainingSample s;
  s.input = gray2x2(0, 0, 0, 0);
  s.gt = gray2x2(1, 1, 1, 1);
  s.poisoned = s.pseudo = s.input;
  s.target = gray2x2(0.2, 0.2, 0.2, 0.2);
  BackdoorTrainConfig c;
  c.mode = TrainMode::two_term;
  c.legacy_lambda = 0.25;
  // clean |.| = .5,.5,0,0 -> .25 ; poison .2,0,.2,.4 -> .2
  const auto l = two_term_loss(gray2x2(0.5, 0.5, 1, 1), gray2x2(0.0, 0.2, 0.4, 0.6), s, c);
  EXPECT_NEAR(l.clean, 0.25, 1e-15);
  EXPECT_NEAR(l.poison, 0.2, 1e-15);
  EXPECT_NEAR(l.total, 0.25 * 0.25 + 0.75 * 0.2, 1e-15);
}

TEST(TwoTermLoss, LambdaOneIsCleanLoss) {
  const TrainingSample s{random_image(5, 5, 3, 1), random_image(5, 5, 3, 2), random_image(5, 5, 3, 3),
                         random_image(5, 5, 3, 4), random_image(5, 5, 3, 5)};
  BackdoorTrainConfig c;
  c.mode = TrainMode::two_term;
  c.legacy_lambda = 1.0;
  const Image oc = random_image(5, 5, 3, 6);
  const auto l = two_term_loss(oc, random_image(5, 5, 3, 7), s, c);
  EXPECT_EQ(l.total, mean_abs_diff(oc, s.gt));
}

TEST(TwoTermLoss, LambdaZeroGivesNoCleanGradient) {
  // With lambda = 0 the clean view must not influence the parameters.
  const RestorationModel<double> m(tiny_arch(4));
  BackdoorTrainConfig c;
  c.mode = TrainMode::two_term;
  c.legacy_lambda = 0.0;
  const auto p = random_image(8, 8, 3, 1).as<double>(), t = random_image(8, 8, 3, 2).as<double>();
  const Tensor<double> none;
  GradSet<double> g1(m.params()), g2(m.params());
  const auto l1 = victim_sample_loss(m, random_image(8, 8, 3, 3).as<double>(), random_image(8, 8, 3, 4).as<double>(),
                                     p, none, t, c, &g1);
  const auto l2 = victim_sample_loss(m, random_image(8, 8, 3, 5).as<double>(), random_image(8, 8, 3, 6).as<double>(),
                                     p, none, t, c, &g2);
  EXPECT_EQ(l1.total, l2.total);
  for (std::size_t k = 0; k < g1.grads.size(); ++k) ASSERT_EQ(g1.grads[k], g2.grads[k]) << m.params().name(k);
}

TEST(VictimSampleLoss, AgreesWithImageLevelLoss) {
  const RestorationModel<double> m(tiny_arch(6));
  const Image in = random_image(8, 8, 3, 1), gt = random_image(8, 8, 3, 2), p = random_image(8, 8, 3, 3),
              q = random_image(8, 8, 3, 4), t = random_image(8, 8, 3, 5);
  const BackdoorTrainConfig c;
  const auto l = victim_sample_loss(m, in.as<double>(), gt.as<double>(), p.as<double>(), q.as<double>(),
                                    t.as<double>(), c);
  const auto ref = backdoor_loss(m.restore(in), m.restore(p), m.restore(q), {in, gt, p, q, t}, c);
  EXPECT_NEAR(l.clean, ref.clean, 1e-12);
  EXPECT_NEAR(l.poison, ref.poison, 1e-12);
  EXPECT_NEAR(l.pseudo, ref.pseudo, 1e-12);
  EXPECT_NEAR(l.total, ref.total, 1e-12);
}

// ---------------------------------------------------------------- pseudo poison

TEST(PseudoPoison, SingletonPoolIsDeterministic) {
  auto inj = small_injector(2);
  TriggerSet ts = make_trigger_set(16, 16, 3, 5, 1);
  const Image img = random_image(16, 16, 3, 8);
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(s);
    const auto pp = make_pseudo_poison(img, ts, *inj, rng);
    EXPECT_EQ(pp.index, 0u);
    EXPECT_EQ(pp.image, inj->inject(img, ts.pseudo_pool[0]));
  }
}

TEST(PseudoPoison, EmptyPoolIsParameterError) {
  auto inj = small_injector(2);
  TriggerSet ts = make_trigger_set(16, 16, 3, 5, 1);
  ts.pseudo_pool.clear();
  Rng rng(1);
  EXPECT_THROW(make_pseudo_poison(random_image(16, 16, 3, 1), ts, *inj, rng), ParameterError);
}

TEST(PseudoPoison, InheritsBudget) {
  auto inj = small_injector(3);
  const TriggerSet ts = make_trigger_set(16, 16, 3, 6);
  Rng rng(4);
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Image img = random_image(16, 16, 3, 50 + k);
    ASSERT_LE(max_abs_diff(make_pseudo_poison(img, ts, *inj, rng).image, img), inj->config().epsilon);
  }
}

TEST(PseudoPoison, SeededIndicesReproducible) {
  auto inj = small_injector(3);
  const TriggerSet ts = make_trigger_set(16, 16, 3, 6);
  const Image img = random_image(16, 16, 3, 1);
  auto draw = [&](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> idx;
    for (int i = 0; i < 30; ++i) idx.push_back(make_pseudo_poison(img, ts, *inj, rng).index);
    return idx;
  };
  const auto a = draw(7);
  EXPECT_EQ(a, draw(7));
  EXPECT_GT(std::set<std::size_t>(a.begin(), a.end()).size(), 4u);
}

// ---------------------------------------------------------------- train_victim

TEST(TrainVictim, CleanModeIgnoresAttack) {
  const PairedSet d = tiny_pairs(6, 32, 1);
  const auto ts = std::make_shared<const TriggerSet>(make_trigger_set(32, 32, 3, 2));
  const Attack a1 = learned_attack(small_injector(1), ts), a2 = learned_attack(small_injector(99), ts);
  BackdoorTrainConfig c;
  c.mode = TrainMode::clean;
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 3;
  const auto r1 = train_victim(tiny_arch(), &a1, d, c), r2 = train_victim(tiny_arch(), &a2, d, c),
             r3 = train_victim(tiny_arch(), nullptr, d, c);
  EXPECT_TRUE(same_params(r1.model.params(), r2.model.params()));
  EXPECT_TRUE(same_params(r1.model.params(), r3.model.params()));
}

TEST(TrainVictim, AttackRequiredOutsideCleanMode) {
  const PairedSet d = tiny_pairs(2, 32, 1);
  BackdoorTrainConfig c;
  c.epochs = 1;
  EXPECT_THROW(train_victim(tiny_arch(), nullptr, d, c), ParameterError);
  c.mode = TrainMode::two_term;
  EXPECT_THROW(train_victim(tiny_arch(), nullptr, d, c), ParameterError);
}

TEST(TrainVictim, InjectorParamsUnchanged) {
  const PairedSet d = tiny_pairs(4, 32, 2);
  const auto inj = small_injector(5);
  const ParamSet<float> before = inj->params();
  const auto ts = std::make_shared<const TriggerSet>(make_trigger_set(32, 32, 3, 2));
  const Attack a = learned_attack(inj, ts);
  BackdoorTrainConfig c;
  c.epochs = 2;
  c.batch_size = 2;
  train_victim(tiny_arch(), &a, d, c);
  EXPECT_TRUE(same_params(before, inj->params()));
}

TEST(TrainVictim, SeededReproducibilityAndWorkers) {
  const PairedSet d = tiny_pairs(5, 32, 4);
  const auto ts = std::make_shared<const TriggerSet>(make_trigger_set(32, 32, 3, 8));
  const Attack a = learned_attack(small_injector(6), ts);
  BackdoorTrainConfig c;
  c.epochs = 2;
  c.batch_size = 3;
  c.seed = 12;
  const auto r1 = train_victim(tiny_arch(), &a, d, c), r2 = train_victim(tiny_arch(), &a, d, c);
  EXPECT_TRUE(same_params(r1.model.params(), r2.model.params()));
  EXPECT_EQ(r1.pseudo_draws, r2.pseudo_draws);
  ASSERT_EQ(r1.history.size(), 2u);
  EXPECT_EQ(r1.history[1].mean.total, r2.history[1].mean.total);
  c.workers = 3;
  const auto r3 = train_victim(tiny_arch(), &a, d, c);
  EXPECT_TRUE(same_params(r1.model.params(), r3.model.params()));
  c.workers = 1;
  c.seed = 13;
  const auto r4 = train_victim(tiny_arch(), &a, d, c);
  EXPECT_FALSE(same_params(r1.model.params(), r4.model.params()));
}

TEST(TrainVictim, HistoryDecomposes) {
  const PairedSet d = tiny_pairs(4, 32, 5);
  const auto ts = std::make_shared<const TriggerSet>(make_trigger_set(32, 32, 3, 8));
  const Attack a = learned_attack(small_injector(6), ts);
  BackdoorTrainConfig c;
  c.epochs = 2;
  c.batch_size = 2;
  for (const auto& h : train_victim(tiny_arch(), &a, d, c).history)
    EXPECT_NEAR(h.mean.total, 0.75 * h.mean.clean + 0.125 * h.mean.poison + 0.125 * h.mean.pseudo, 1e-9);
}

TEST(TrainVictim, NonFiniteLossReportsBatch) {
  PairedSet d = tiny_pairs(6, 32, 6);
  d.gt[4][10] = std::numeric_limits<double>::quiet_NaN();
  BackdoorTrainConfig c;
  c.mode = TrainMode::clean;
  c.batch_size = 2;
  c.seed = 1;
  try {
    train_victim(tiny_arch(), nullptr, d, c);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_LT(e.batch(), 3u);
  }
}

TEST(TrainVictim, GradientMatchesFiniteDifferences) {
  VictimGradProblem prob(8, 2, 17);
  const auto samples = prob.check(10, 3).samples;
  ASSERT_EQ(samples.size(), 10u);
  for (const auto& s : samples)
    EXPECT_LE(s.rel_error, 1e-3) << s.name << "[" << s.flat << "] analytic " << s.analytic << " numeric " << s.numeric;
}

TEST(TrainVictim, CleanTrainingImprovesHeldOut) {
  const PairedSet train = tiny_pairs(24, 32, 40), test = tiny_pairs(6, 32, 41);
  BackdoorTrainConfig c;
  c.mode = TrainMode::clean;
  c.epochs = 40;
  c.batch_size = 4;
  c.learning_rate = 3e-3;
  const auto r = train_victim(RestorationConfig{3, 8, true, 2}, nullptr, train, c);
  double before = 0, after = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    before += psnr(test.lq[i], test.gt[i]);
    after += psnr(r.model.restore(test.lq[i]), test.gt[i]);
  }
  EXPECT_GT(after, before);
}
