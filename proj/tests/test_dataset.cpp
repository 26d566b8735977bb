#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "fogpop/dataset.hpp"
#include "fogpop/errors.hpp"
#include "fogpop/synthetic.hpp"
#include "fogpop/topology.hpp"

using namespace fogpop;

namespace {

const char* kUsers =
    "1::F::1::10::48067\n"
    "2::M::56::16::70072\n"
    "3::M::25::15::55117\n";

const char* kMovies =
    "1::Toy Story (1995)::Animation|Children's|Comedy\n"
    "2::Jumanji (1995)::Adventure|Children's|Fantasy\n"
    "3::Heat (1995)::Action|Crime|Thriller\n"
    "4::Never Rated (1999)::Drama\n";

const char* kRatings =
    "1::1::5::978300760\n"
    "1::2::3::978302109\n"
    "2::3::4::978301968\n"
    "3::1::1::978300275\n";

double sum(const InfoVector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Dataset, ParsesRatingLine) {
  const auto rs = parse_ratings("1::1193::5::978300760\n");
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(raw(rs[0].user), 1u);
  EXPECT_EQ(raw(rs[0].content), 1193u);
  EXPECT_EQ(rs[0].rating, 5);
  EXPECT_EQ(rs[0].timestamp, 978300760);
}

TEST(Dataset, EmptyRatingsGiveNoRequests) {
  const auto ds = parse_movielens("", kUsers, kMovies);
  EXPECT_TRUE(ds.requests.empty());
  EXPECT_EQ(ds.library_size(), 4u);
}

TEST(Dataset, UnratedMoviesStayInLibrary) {
  const auto ds = parse_movielens(kRatings, kUsers, kMovies);
  EXPECT_EQ(ds.requests.size(), 4u);
  EXPECT_EQ(ds.users.size(), 3u);
  EXPECT_EQ(ds.library_size(), 4u);
  EXPECT_TRUE(ds.contents.count(ContentId{4}));
}

TEST(Dataset, MalformedLineReportsLineNumber) {
  try {
    parse_ratings("1::1::5::1\n2::x::3::4\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Dataset, RatingOutOfRangeIsValidationError) {
  EXPECT_THROW(parse_ratings("1::1::6::1\n"), ValidationError);
  EXPECT_THROW(parse_ratings("1::1::0::1\n"), ValidationError);
}

TEST(Dataset, UnknownReferencesAreValidationErrors) {
  EXPECT_THROW(parse_movielens("9::1::5::1\n", kUsers, kMovies), ValidationError);
  EXPECT_THROW(parse_movielens("1::99::5::1\n", kUsers, kMovies), ValidationError);
}

TEST(Dataset, RatingsRoundTripLineForLine) {
  const std::string text = kRatings;
  EXPECT_EQ(format_ratings(parse_ratings(text)), text);
}

TEST(Dataset, MovieLensFilesRoundTrip) {
  const auto ds = parse_movielens(kRatings, kUsers, kMovies);
  const auto dir = std::filesystem::temp_directory_path() / "fogpop_ml_roundtrip";
  write_movielens(ds, dir);
  const auto back = load_movielens(dir);
  EXPECT_EQ(back.requests, ds.requests);
  EXPECT_EQ(format_users(back), format_users(ds));
  EXPECT_EQ(format_movies(back), format_movies(ds));
  std::filesystem::remove_all(dir);
}

TEST(Dataset, UserInfoOneHotPlacement) {
  // Independent code tables: gender block, then age block, then occupation block.
  const std::vector<std::string> genders = {"M", "F"};
  const std::vector<int> ages = {1, 18, 25, 35, 45, 50, 56};
  for (std::size_t g = 0; g < genders.size(); ++g) {
    for (std::size_t a = 0; a < ages.size(); ++a) {
      for (int occ = 0; occ < 21; ++occ) {
        const auto v = encode_user_info(genders[g], ages[a], occ);
        ASSERT_EQ(v.size(), 30u);
        ASSERT_EQ(sum(v), 3.0);
        EXPECT_EQ(v[g], 1.0);
        EXPECT_EQ(v[2 + a], 1.0);
        EXPECT_EQ(v[9 + static_cast<std::size_t>(occ)], 1.0);
      }
    }
  }
  const auto f = encode_user_info("F", 1, 10);
  EXPECT_EQ(f[1], 1.0);
  EXPECT_EQ(f[2], 1.0);
  EXPECT_EQ(f[19], 1.0);
}

TEST(Dataset, UserInfoRejectsUnknownCodes) {
  EXPECT_THROW(encode_user_info("X", 1, 0), ValidationError);
  EXPECT_THROW(encode_user_info("M", 2, 0), ValidationError);
  EXPECT_THROW(encode_user_info("M", 1, 21), ValidationError);
  EXPECT_THROW(encode_user_info("M", 1, -1), ValidationError);
}

TEST(Dataset, ContentInfoMultiHot) {
  const std::vector<std::string> comedy = {"Comedy"};
  const std::vector<std::string> two = {"Action", "Thriller"};
  const auto a = encode_content_info(comedy);
  const auto b = encode_content_info(two);
  ASSERT_EQ(a.size(), 18u);
  EXPECT_EQ(sum(a), 1.0);
  EXPECT_EQ(a[4], 1.0);
  EXPECT_EQ(sum(b), 2.0);
  EXPECT_EQ(b[0], 1.0);
  EXPECT_EQ(b[15], 1.0);
  EXPECT_THROW(encode_content_info(std::vector<std::string>{}), ValidationError);
  EXPECT_THROW(encode_content_info(std::vector<std::string>{"Polka"}), ValidationError);
}

TEST(Dataset, SplitIsPerUserChronological) {
  Dataset ds = parse_movielens("", kUsers, kMovies);
  // User 1: four requests given out of time order; user 2: two requests.
  ds.requests = {{UserId{1}, ContentId{1}, 5, 3}, {UserId{1}, ContentId{2}, 4, 1},
                 {UserId{1}, ContentId{3}, 3, 4}, {UserId{1}, ContentId{4}, 2, 2},
                 {UserId{2}, ContentId{1}, 5, 10}, {UserId{2}, ContentId{2}, 5, 11},
                 {UserId{3}, ContentId{1}, 1, 7}};
  const auto s = split_train_test(ds, 0.75);
  EXPECT_EQ(s.train.requests.size() + s.test.requests.size(), ds.requests.size());
  std::vector<std::int64_t> u1_test;
  for (const auto& r : s.test.requests) {
    if (r.user == UserId{1}) u1_test.push_back(r.timestamp);
  }
  EXPECT_EQ(u1_test, std::vector<std::int64_t>{4});
  // Single-request user stays in train.
  EXPECT_TRUE(std::none_of(s.test.requests.begin(), s.test.requests.end(),
                           [](const RequestRecord& r) { return r.user == UserId{3}; }));

  const auto s99 = split_train_test(ds, 0.99);
  EXPECT_TRUE(std::none_of(s99.test.requests.begin(), s99.test.requests.end(),
                           [](const RequestRecord& r) { return r.user == UserId{2}; }));
}

TEST(Dataset, SplitNeverLeaksTheFuture) {
  const auto corpus = synthesize_dataset(200, 150, 4, 2, 3);
  const auto s = split_train_test(corpus.dataset, 0.8);
  std::map<UserId, std::int64_t> last_train;
  for (const auto& r : s.train.requests) {
    last_train[r.user] = std::max(last_train[r.user], r.timestamp);
  }
  for (const auto& r : s.test.requests) EXPECT_LE(last_train.at(r.user), r.timestamp);
  EXPECT_EQ(s.train.requests.size() + s.test.requests.size(), corpus.dataset.requests.size());
}

TEST(Topology, CoversEveryUserOnce) {
  const auto corpus = synthesize_dataset(120, 80, 4, 2, 5);
  for (const auto mode : {SkewMode::uniform, SkewMode::genre}) {
    for (const double ratio : {0.0, 0.25, 0.5}) {
      const auto t = build_topology(corpus.dataset, 4, ratio, mode, 11);
      std::set<UserId> seen;
      std::size_t n = 0;
      for (const auto& l : t.local_users) {
        for (const auto u : l) {
          seen.insert(u);
          ++n;
        }
      }
      for (const auto u : t.mobile_users) {
        seen.insert(u);
        ++n;
      }
      EXPECT_EQ(n, corpus.dataset.users.size());
      EXPECT_EQ(seen.size(), corpus.dataset.users.size());
      EXPECT_EQ(t.mobile_users.size(),
                static_cast<std::size_t>(ratio * static_cast<double>(corpus.dataset.users.size())));
      EXPECT_NO_THROW(t.validate(corpus.dataset));
    }
  }
}

TEST(Topology, BoundaryCasesAndDeterminism) {
  const auto corpus = synthesize_dataset(60, 50, 2, 1, 2);
  const auto none = build_topology(corpus.dataset, 3, 0.0, SkewMode::uniform, 1);
  EXPECT_TRUE(none.mobile_users.empty());
  const auto one = build_topology(corpus.dataset, 1, 0.0, SkewMode::uniform, 1);
  EXPECT_EQ(one.local_users[0].size(), corpus.dataset.users.size());
  const auto a = build_topology(corpus.dataset, 3, 0.3, SkewMode::genre, 9);
  const auto b = build_topology(corpus.dataset, 3, 0.3, SkewMode::genre, 9);
  EXPECT_EQ(a.local_users, b.local_users);
  EXPECT_EQ(a.mobile_users, b.mobile_users);
  EXPECT_THROW(build_topology(corpus.dataset, 61, 0.0, SkewMode::uniform, 1), ConfigError);
}

TEST(Topology, HomesDoNotDependOnMobileRatio) {
  const auto corpus = synthesize_dataset(100, 60, 4, 2, 4);
  const auto low = build_topology(corpus.dataset, 4, 0.1, SkewMode::uniform, 3);
  const auto high = build_topology(corpus.dataset, 4, 0.4, SkewMode::uniform, 3);
  for (const auto u : low.mobile_users) EXPECT_TRUE(high.is_mobile(u));
  for (std::size_t m = 0; m < 4; ++m) {
    for (const auto u : high.local_users[m]) EXPECT_EQ(low.home_of(u), m);
  }
}

TEST(Synthetic, DeterministicAndPlanted) {
  const auto a = synthesize_dataset(120, 90, 6, 3, 7);
  const auto b = synthesize_dataset(120, 90, 6, 3, 7);
  EXPECT_EQ(format_ratings(a.dataset.requests), format_ratings(b.dataset.requests));
  EXPECT_EQ(format_users(a.dataset), format_users(b.dataset));
  EXPECT_EQ(a.ground_truth_clusters, b.ground_truth_clusters);
  ASSERT_EQ(a.ground_truth_clusters.size(), 3u);
  for (const auto& g : a.ground_truth_clusters) EXPECT_EQ(g.size(), 2u);
  EXPECT_NO_THROW(a.dataset.validate());
  EXPECT_NO_THROW(a.topology.validate(a.dataset));
}

TEST(Synthetic, ClusterCountBoundaries) {
  const auto one = synthesize_dataset(60, 50, 3, 1, 1);
  EXPECT_EQ(one.ground_truth_clusters.size(), 1u);
  const auto each = synthesize_dataset(60, 50, 3, 3, 1);
  EXPECT_EQ(each.ground_truth_clusters.size(), 3u);
  EXPECT_THROW(synthesize_dataset(60, 50, 3, 4, 1), ConfigError);
  EXPECT_THROW(synthesize_dataset(60, 50, 4, 3, 1), ConfigError);
}

TEST(Synthetic, RoundTripsThroughMovieLensFormat) {
  const auto corpus = synthesize_dataset(50, 40, 2, 1, 8);
  const auto dir = std::filesystem::temp_directory_path() / "fogpop_synth_roundtrip";
  write_movielens(corpus.dataset, dir);
  const auto back = load_movielens(dir);
  EXPECT_EQ(back.requests, corpus.dataset.requests);
  EXPECT_EQ(back.library_size(), corpus.dataset.library_size());
  std::filesystem::remove_all(dir);
}

TEST(Dataset, SubsetKeepsMostActive) {
  const auto ds = parse_movielens(kRatings, kUsers, kMovies);
  const auto sub = subset_top(ds, 1, 2);
  EXPECT_EQ(sub.users.size(), 1u);
  EXPECT_TRUE(sub.users.count(UserId{1}));
  EXPECT_EQ(sub.library_size(), 2u);
  EXPECT_NO_THROW(sub.validate());
}

TEST(Dataset, LibraryIndexesById) {
  const auto ds = parse_movielens(kRatings, kUsers, kMovies);
  const Library lib(ds);
  ASSERT_EQ(lib.size(), 4u);
  EXPECT_EQ(lib.dim(), 18u);
  for (std::size_t i = 0; i < lib.size(); ++i) EXPECT_EQ(lib.index(lib.id(i)), i);
  EXPECT_THROW(lib.index(ContentId{77}), ValidationError);
}
