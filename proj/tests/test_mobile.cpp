#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fogpop/dcnn.hpp"
#include "fogpop/errors.hpp"
#include "fogpop/mobile.hpp"
#include "fogpop/synthetic.hpp"

using namespace fogpop;

namespace {

// Overlapping classes, so the NLL minimizer is finite.
std::vector<MobileSample> toy_samples() {
  return {
      {{1, 0, 1, 0}, 1}, {{1, 0, 0, 1}, 1}, {{1, 1, 0, 0}, 0}, {{0, 1, 1, 0}, 1},
      {{0, 1, 0, 1}, 0}, {{0, 0, 1, 1}, 0}, {{1, 0, 1, 0}, 0}, {{0, 1, 0, 1}, 1},
      {{1, 1, 0, 0}, 0}, {{0, 0, 1, 1}, 1}, {{1, 0, 0, 1}, 1}, {{0, 1, 1, 0}, 0},
  };
}

// Batch gradient descent on the mean NLL, an independent reference optimizer.
std::vector<double> gradient_descent(const std::vector<MobileSample>& samples, double lr,
                                     std::size_t steps) {
  const std::size_t d = samples.front().zeta.size();
  std::vector<double> w(d, 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<double> g(d, 0.0);
    for (const auto& x : samples) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += w[i] * x.zeta[i];
      const double p = 1.0 / (1.0 + std::exp(-dot));
      for (std::size_t i = 0; i < d; ++i) g[i] += (p - x.y) * x.zeta[i];
    }
    for (std::size_t i = 0; i < d; ++i) w[i] -= lr * g[i] / static_cast<double>(samples.size());
  }
  return w;
}

}  // namespace

TEST(Mobile, PredictExamples) {
  const std::vector<double> zero(3, 0.0);
  EXPECT_EQ(predict_preference(zero, std::vector<double>{1, 0, 1}), 0.5);
  const std::vector<double> a = {std::log(3.0), 0.0};
  EXPECT_NEAR(predict_preference(a, std::vector<double>{1, 1}), 0.75, 1e-15);

  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> w(4);
    std::vector<double> z(4);
    for (auto& x : w) x = n(gen);
    for (auto& x : z) x = std::abs(n(gen));
    const double q = predict_preference(w, z);
    EXPECT_GT(q, 0.0);
    EXPECT_LT(q, 1.0);
    for (auto& x : w) x = -x;
    EXPECT_NEAR(predict_preference(w, z), 1.0 - q, 1e-12);
  }
  EXPECT_THROW(predict_preference(zero, std::vector<double>{1, 0}), ValidationError);
}

TEST(Mobile, NllExamples) {
  const auto samples = toy_samples();
  EXPECT_NEAR(preference_nll(std::vector<double>(4, 0.0), samples), std::log(2.0), 1e-15);
  const std::vector<double> w = {0.3, -0.7, 1.1, 0.2};
  const std::vector<MobileSample> one = {samples[2]};
  EXPECT_DOUBLE_EQ(preference_nll(w, one), bce_loss(predict_preference(w, one[0].zeta), 0));

  const std::vector<MobileSample> separable = {{{1, 0}, 1}, {{0, 1}, 0}};
  const std::vector<double> far = {40.0, -40.0};
  EXPECT_LT(preference_nll(far, separable), 1e-6);  // clamp floor
}

TEST(Mobile, FtrlFirstStepByHand) {
  FtrlConfig cfg;
  cfg.alpha = 0.1;
  cfg.beta = 1.0;
  cfg.l1 = 0.0;
  cfg.l2 = 0.0;
  FtrlState state(3);
  std::vector<double> w(3, 0.0);
  ftrl_update(state, w, std::vector<double>{1, 0, 0}, 1, cfg);
  EXPECT_NEAR(state.z[0], -0.5, 1e-12);
  EXPECT_NEAR(state.n[0], 0.25, 1e-12);
  EXPECT_NEAR(w[0], 0.5 / ((cfg.beta + 0.5) / cfg.alpha), 1e-12);
  EXPECT_EQ(w[1], 0.0);
  EXPECT_EQ(w[2], 0.0);
  EXPECT_EQ(state.z[1], 0.0);
  EXPECT_EQ(state.n[2], 0.0);
}

TEST(Mobile, FtrlZeroFeatureLeavesCoordinateUntouched) {
  FtrlConfig cfg;
  FtrlState state(3);
  state.z = {0.5, -2.0, 0.3};
  state.n = {1.0, 4.0, 0.5};
  std::vector<double> w = {0.1, 0.2, -0.3};
  ftrl_update(state, w, std::vector<double>{1, 0, 1}, 0, cfg);
  EXPECT_EQ(state.z[1], -2.0);
  EXPECT_EQ(state.n[1], 4.0);
  EXPECT_EQ(w[1], 0.2);
}

TEST(Mobile, FtrlL1ThresholdAndMonotoneN) {
  FtrlConfig cfg;
  cfg.l1 = 10.0;
  FtrlState state(4);
  std::vector<double> w(4, 0.0);
  auto prev_n = state.n;
  for (const auto& s : toy_samples()) {
    ftrl_update(state, w, s.zeta, s.y, cfg);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_GE(state.n[i], prev_n[i]);
      if (std::abs(state.z[i]) <= cfg.l1) EXPECT_EQ(w[i], 0.0);
    }
    prev_n = state.n;
  }
}

TEST(Mobile, SparsityNeverFiredCoordinatesStayZero) {
  std::mt19937_64 gen(9);
  std::bernoulli_distribution on(0.5);
  std::vector<MobileSample> samples;
  for (int k = 0; k < 60; ++k) {
    MobileSample s;
    s.zeta = {1.0, on(gen) ? 1.0 : 0.0, 0.0, on(gen) ? 1.0 : 0.0, 0.0};
    s.y = on(gen) ? 1 : 0;
    samples.push_back(s);
  }
  FtrlConfig cfg;
  cfg.passes = 5;
  const auto w = train_preference(samples, cfg, 4);
  EXPECT_EQ(w[2], 0.0);
  EXPECT_EQ(w[4], 0.0);
}

TEST(Mobile, AllNegativeLabelsGiveNonPositiveWeights) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<MobileSample> samples;
  for (int k = 0; k < 50; ++k) samples.push_back({{u(gen), u(gen), u(gen), 0.0}, 0});
  FtrlConfig cfg;
  cfg.passes = 3;
  for (const double w : train_preference(samples, cfg, 1)) EXPECT_LE(w, 0.0);
}

TEST(Mobile, TrainingReducesNllAndIsDeterministic) {
  const auto samples = toy_samples();
  FtrlConfig cfg;
  cfg.passes = 20;
  const auto a = train_preference(samples, cfg, 7);
  const auto b = train_preference(samples, cfg, 7);
  EXPECT_EQ(a, b);
  EXPECT_LT(preference_nll(a, samples), preference_nll(std::vector<double>(4, 0.0), samples));
  EXPECT_THROW(train_preference({}, cfg, 7), ValidationError);
}

TEST(Mobile, FtrlNllCloseToGradientDescentOracle) {
  const auto samples = toy_samples();
  FtrlConfig cfg;
  cfg.alpha = 0.5;
  cfg.l1 = 0.0;
  cfg.l2 = 0.0;
  cfg.passes = 300;
  const double ftrl = preference_nll(train_preference(samples, cfg, 3), samples);
  const double gd = preference_nll(gradient_descent(samples, 0.5, 20000), samples);
  EXPECT_LE(ftrl, 1.1 * gd);
  EXPECT_GE(ftrl, gd - 1e-6);
}

TEST(Mobile, RetrainIfStaleBoundaries) {
  const auto samples = toy_samples();
  const PreferenceVector zero(4, 0.0);
  FtrlConfig cfg;
  const double ln2 = std::log(2.0);
  EXPECT_EQ(retrain_if_stale(zero, samples, std::numeric_limits<double>::infinity(), cfg, 1), zero);
  EXPECT_EQ(retrain_if_stale(zero, samples, ln2 + 1e-9, cfg, 1), zero);
  EXPECT_EQ(retrain_if_stale(zero, {}, 0.0, cfg, 1), zero);
  EXPECT_NE(retrain_if_stale(zero, samples, ln2 - 1e-9, cfg, 1), zero);
}

TEST(Mobile, SamplesFollowNegativeSamplingPolicy) {
  const auto corpus = synthesize_dataset(60, 50, 2, 1, 3);
  const Library lib(corpus.dataset);
  const std::vector<std::size_t> requested = {3, 7, 3, 11};
  const auto s = build_mobile_samples(requested, lib, 4, 9);
  std::size_t pos = 0;
  for (const auto& x : s) pos += static_cast<std::size_t>(x.y);
  EXPECT_EQ(pos, 3u);
  EXPECT_EQ(s.size(), 3u + 12u);
  EXPECT_EQ(s[0].zeta, std::vector<double>(lib.info(3).begin(), lib.info(3).end()));

  const auto all = build_mobile_samples(requested, lib, 1000, 9);
  EXPECT_EQ(all.size(), lib.size());
}

TEST(Mobile, MobilePopularityExamples) {
  const std::vector<MobileReport> none;
  const auto empty = mobile_popularity(none, 3);
  EXPECT_FALSE(empty.defined);
  EXPECT_EQ(empty.values, (std::vector<double>{0, 0, 0}));

  const std::vector<MobileReport> one = {{0, 0, UserId{1}, {0.1, 0.9}}};
  const auto single = mobile_popularity(one, 2);
  EXPECT_TRUE(single.defined);
  EXPECT_EQ(single.values, (std::vector<double>{0.1, 0.9}));

  const std::vector<MobileReport> two = {{0, 0, UserId{1}, {0.2}}, {0, 0, UserId{2}, {0.6}}};
  EXPECT_NEAR(mobile_popularity(two, 1).values[0], 0.4, 1e-15);
}

TEST(Mobile, ReportsStayInUnitInterval) {
  const auto corpus = synthesize_dataset(60, 50, 2, 1, 3);
  const Library lib(corpus.dataset);
  const PreferenceVector pref(lib.dim(), 0.8);
  const auto r = make_report(1, 2, UserId{5}, pref, lib);
  ASSERT_EQ(r.q_hat.size(), lib.size());
  for (const double q : r.q_hat) {
    EXPECT_GT(q, 0.0);
    EXPECT_LT(q, 1.0);
  }
}
