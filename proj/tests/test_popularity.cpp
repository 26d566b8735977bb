#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fogpop/errors.hpp"
#include "fogpop/popularity.hpp"
#include "fogpop/synthetic.hpp"

using namespace fogpop;

namespace {

Distribution dist(std::vector<double> v) { return {std::move(v), true}; }

}  // namespace

TEST(Popularity, ActivityLevelsAreRequestShares) {
  const auto corpus = synthesize_dataset(60, 50, 2, 1, 3);
  const Library lib(corpus.dataset);
  const FapRequests scope(corpus.dataset.requests, corpus.topology.local_users[1], lib);
  const auto a = activity_levels(scope);
  ASSERT_EQ(a.levels.size(), scope.user_count());
  std::size_t total = 0;
  for (std::size_t u = 0; u < scope.user_count(); ++u) total += scope.request_count(u);
  double sum = 0.0;
  for (std::size_t u = 0; u < a.levels.size(); ++u) {
    EXPECT_DOUBLE_EQ(a.levels[u], static_cast<double>(scope.request_count(u)) /
                                      static_cast<double>(total));
    sum += a.levels[u];
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Popularity, LocalPopularityOfZeroModelIsHalf) {
  const auto corpus = synthesize_dataset(60, 50, 2, 1, 3);
  const Library lib(corpus.dataset);
  const FapRequests scope(corpus.dataset.requests, corpus.topology.local_users[0], lib);
  const auto features = build_fap_features(scope, corpus.dataset, lib, {});
  const std::size_t hidden[] = {8};
  auto model = init_model(features.user_features.cols, features.content_features.cols, hidden, 4, 1);
  for (auto& p : model.parameters()) p = 0.0;
  const auto activity = activity_levels(scope);
  const auto p = local_popularity(model, features, activity);
  ASSERT_EQ(p.size(), lib.size());
  for (const double x : p) EXPECT_NEAR(x, 0.5, 1e-12);

  // Direct per-pair evaluation agrees with the cached item transform.
  const auto trained = init_model(features.user_features.cols, features.content_features.cols,
                                  hidden, 4, 2);
  const auto fast = local_popularity(trained, features, activity);
  for (std::size_t i = 0; i < lib.size(); i += 7) {
    double slow = 0.0;
    for (std::size_t u = 0; u < activity.users.size(); ++u) {
      slow += activity.levels[u] * predict(trained, features.user_features.row(u),
                                           features.content_features.row(i));
    }
    EXPECT_NEAR(fast[i], slow, 1e-12);
  }
}

TEST(Popularity, NormalizeExamples) {
  const auto d = normalize(std::vector<double>{1.0, 3.0});
  EXPECT_TRUE(d.defined);
  EXPECT_EQ(d.values, (std::vector<double>{0.25, 0.75}));
  const auto z = normalize(std::vector<double>{0.0, 0.0, 0.0});
  EXPECT_FALSE(z.defined);
  EXPECT_THROW(normalize(std::vector<double>{1.0, -0.5}), ValidationError);

  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(50);
    for (auto& x : v) x = u(gen);
    const auto n = normalize(v);
    EXPECT_NEAR(std::accumulate(n.values.begin(), n.values.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Popularity, IntegrateBoundariesAndSum) {
  const auto local = dist({0.5, 0.3, 0.2});
  const auto mobile = dist({0.1, 0.1, 0.8});
  EXPECT_EQ(integrate(local, mobile, 0.0), local.values);
  EXPECT_EQ(integrate(local, mobile, 1.0), mobile.values);
  const auto mid = integrate(local, mobile, 0.25);
  EXPECT_NEAR(mid[0], 0.75 * 0.5 + 0.25 * 0.1, 1e-15);
  EXPECT_NEAR(std::accumulate(mid.begin(), mid.end(), 0.0), 1.0, 1e-12);

  const Distribution undefined{{0.0, 0.0, 0.0}, false};
  EXPECT_EQ(integrate(local, undefined, 0.4), local.values);
  EXPECT_EQ(integrate(undefined, mobile, 0.4), mobile.values);
  EXPECT_THROW(integrate(undefined, undefined, 0.4), ValidationError);
  EXPECT_THROW(integrate(local, mobile, 1.5), ValidationError);
  EXPECT_THROW(integrate(local, mobile, -0.1), ValidationError);
}

TEST(Popularity, MobileWeight) {
  EXPECT_EQ(mobile_weight(0, 10), 0.0);
  EXPECT_EQ(mobile_weight(3, 0), 1.0);
  EXPECT_EQ(mobile_weight(1, 3), 0.25);
  EXPECT_EQ(mobile_weight(0, 0), 0.0);
}

TEST(Popularity, SelectCacheTopKWithTies) {
  const std::vector<double> scores = {0.1, 0.4, 0.4, 0.05, 0.3};
  const auto c = select_cache(scores, 2);
  EXPECT_EQ(c.cached, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(c.psi, (std::vector<std::uint8_t>{0, 1, 1, 0, 0}));
  const auto tie = select_cache(std::vector<double>{1, 1, 1, 1}, 3);
  EXPECT_EQ(tie.cached, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(select_cache(scores, 0).cached.empty());
  EXPECT_EQ(select_cache(scores, 99).cached.size(), scores.size());

  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(30);
    for (auto& x : s) x = u(gen);
    const auto k = static_cast<std::size_t>(t % 31);
    const auto d = select_cache(s, k);
    EXPECT_EQ(std::accumulate(d.psi.begin(), d.psi.end(), std::size_t{0}), k);
    double min_in = 2.0;
    double max_out = -1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (d.psi[i]) {
        min_in = std::min(min_in, s[i]);
      } else {
        max_out = std::max(max_out, s[i]);
      }
    }
    if (k > 0 && k < s.size()) EXPECT_GE(min_in, max_out);
  }
}

TEST(Popularity, TableAndCsv) {
  MobilePopularity mobile{{0.2, 0.2, 0.6}, true};
  const std::vector<double> local_raw = {3.0, 1.0, 0.0};
  const auto t = build_popularity_table(1, 0, local_raw, mobile, 1, 3);
  EXPECT_EQ(t.w, 0.25);
  EXPECT_EQ(t.local, (std::vector<double>{0.75, 0.25, 0.0}));
  EXPECT_NEAR(t.integrated[2], 0.25 * 0.6, 1e-15);
  EXPECT_NEAR(std::accumulate(t.integrated.begin(), t.integrated.end(), 0.0), 1.0, 1e-12);

  const auto no_mobile = build_popularity_table(0, 0, local_raw, MobilePopularity{{0, 0, 0}, false},
                                                0, 3);
  EXPECT_EQ(no_mobile.integrated, no_mobile.local);
  EXPECT_FALSE(no_mobile.mobile_defined);

  const auto corpus = synthesize_dataset(60, 50, 2, 1, 3);
  const Library lib(corpus.dataset);
  std::ostringstream out;
  write_popularity_header(out);
  write_popularity_rows(out, t, select_cache(t.integrated, 1), lib);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "fap,window,content,local,mobile,integrated,cached");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 4 + std::to_string(raw(lib.id(0))).size() + 1),
            "2,1," + std::to_string(raw(lib.id(0))) + ",");
  EXPECT_NE(line.find(",true"), std::string::npos);
}
