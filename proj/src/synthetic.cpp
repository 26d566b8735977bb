#include "fogpop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fogpop/errors.hpp"
#include "fogpop/rng.hpp"

namespace fogpop {

namespace {

constexpr std::int64_t kEpoch = 956'703'932;  // first timestamp in MovieLens 1M
constexpr double kDay = 86'400.0;

std::vector<double> skewed_categorical(Rng& rng, std::size_t n, double spread) {
  std::vector<double> p(n);
  for (auto& x : p) x = std::exp(spread * rng.normal());
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= total;
  return p;
}

std::size_t draw(Rng& rng, const std::vector<double>& p) {
  double u = rng.uniform();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (u < p[k]) return k;
    u -= p[k];
  }
  return p.size() - 1;
}

double affinity(const std::vector<double>& preference, const InfoVector& zeta) {
  double s = 0.0;
  double n = 0.0;
  for (std::size_t g = 0; g < zeta.size(); ++g) {
    s += preference[g] * zeta[g];
    n += zeta[g];
  }
  return n > 0.0 ? s / n : 0.0;
}

}  // namespace

SyntheticCorpus synthesize_dataset(const SyntheticSpec& spec) {
  if (spec.fap_count == 0 || spec.cluster_count == 0) {
    throw ConfigError("F-AP and cluster counts must be positive");
  }
  if (spec.cluster_count > spec.fap_count) throw ConfigError("cluster count exceeds F-AP count");
  if (spec.fap_count % spec.cluster_count != 0) {
    throw ConfigError("cluster count must divide F-AP count");
  }
  if (spec.user_count < spec.fap_count) throw ConfigError("fewer users than F-APs");
  if (spec.content_count < 2 * spec.min_requests) {
    throw ConfigError("content library too small for the minimum request count");
  }

  Rng rng(derive_seed(spec.seed, "synthetic"));
  const auto genres = movielens_genres();
  const std::size_t n_genres = genres.size();
  SyntheticCorpus out;
  Dataset& ds = out.dataset;

  // Contents: one to three genres each, with a few genres far more common.
  std::vector<double> genre_weight(n_genres);
  for (std::size_t g = 0; g < n_genres; ++g) genre_weight[g] = std::exp(0.8 * rng.normal());
  for (std::size_t i = 1; i <= spec.content_count; ++i) {
    const double u = rng.uniform();
    const std::size_t k = u < 0.5 ? 1 : (u < 0.85 ? 2 : 3);
    // Efraimidis-Spirakis weighted sampling without replacement.
    std::vector<std::pair<double, std::size_t>> keys;
    for (std::size_t g = 0; g < n_genres; ++g) {
      double r = rng.uniform();
      while (r <= 0.0) r = rng.uniform();
      keys.emplace_back(std::log(r) / genre_weight[g], g);
    }
    std::sort(keys.begin(), keys.end(), std::greater<>());
    std::vector<std::size_t> picked;
    for (std::size_t j = 0; j < k; ++j) picked.push_back(keys[j].second);
    std::sort(picked.begin(), picked.end());
    ContentInfo c;
    c.title = "Synthetic Title " + std::to_string(i) + " (" +
              std::to_string(1950 + rng.index(50)) + ")";
    for (const auto g : picked) c.genres.emplace_back(genres[g]);
    c.info = encode_content_info(c.genres);
    ds.contents.emplace(ContentId{static_cast<std::uint32_t>(i)}, std::move(c));
  }

  // Profiles: genre preferences and demographic mixes.
  struct Profile {
    std::vector<double> preference;
    std::vector<double> gender, age, occupation;
  };
  std::vector<Profile> profiles(spec.cluster_count);
  for (auto& p : profiles) {
    p.preference.resize(n_genres);
    for (auto& x : p.preference) x = rng.normal();
    p.gender = skewed_categorical(rng, 2, 0.7);
    p.age = skewed_categorical(rng, movielens_age_codes().size(), 1.0);
    p.occupation = skewed_categorical(rng, kOccupationCount, 1.0);
    out.profile_preference.push_back(p.preference);
  }
  // Shared map from demographics to genre taste, so user features carry signal.
  std::vector<double> demo(n_genres * kUserInfoDim);
  for (auto& x : demo) x = spec.demographic_effect * rng.normal();

  std::vector<std::size_t> fap_order(spec.fap_count);
  std::iota(fap_order.begin(), fap_order.end(), 0);
  rng.shuffle(std::span<std::size_t>(fap_order));
  out.fap_profile.assign(spec.fap_count, 0);
  out.ground_truth_clusters.assign(spec.cluster_count, {});
  for (std::size_t k = 0; k < spec.fap_count; ++k) {
    out.fap_profile[fap_order[k]] = k % spec.cluster_count;
  }
  for (std::size_t m = 0; m < spec.fap_count; ++m) {
    out.ground_truth_clusters[out.fap_profile[m]].push_back(m);
  }
  std::sort(out.ground_truth_clusters.begin(), out.ground_truth_clusters.end());

  std::vector<std::uint32_t> user_order(spec.user_count);
  std::iota(user_order.begin(), user_order.end(), 1u);
  rng.shuffle(std::span<std::uint32_t>(user_order));
  out.topology.fap_count = spec.fap_count;
  out.topology.local_users.assign(spec.fap_count, {});
  std::vector<std::size_t> home(spec.user_count + 1);
  for (std::size_t k = 0; k < user_order.size(); ++k) home[user_order[k]] = k % spec.fap_count;

  const auto age_codes = movielens_age_codes();
  const double extra_mean = std::max(0.0, spec.mean_requests - static_cast<double>(spec.min_requests));
  const std::size_t max_requests = spec.content_count / 2;
  for (std::uint32_t uid = 1; uid <= spec.user_count; ++uid) {
    const std::size_t fap = home[uid];
    const Profile& prof = profiles[out.fap_profile[fap]];
    UserInfo u;
    u.gender = draw(rng, prof.gender) == 0 ? "M" : "F";
    u.age = age_codes[draw(rng, prof.age)];
    u.occupation = static_cast<int>(draw(rng, prof.occupation));
    u.zip = std::to_string(10000 + rng.index(89999));
    u.info = encode_user_info(u.gender, u.age, u.occupation);

    std::vector<double> pref = prof.preference;
    for (std::size_t g = 0; g < n_genres; ++g) {
      double d = 0.0;
      for (std::size_t f = 0; f < kUserInfoDim; ++f) d += demo[g * kUserInfoDim + f] * u.info[f];
      pref[g] += d + spec.user_spread * rng.normal();
    }

    double extra = 0.0;
    if (extra_mean > 0.0) {
      double r = rng.uniform();
      while (r <= 0.0) r = rng.uniform();
      extra = -extra_mean * std::log(r);
    }
    const std::size_t n_req =
        std::min(max_requests, spec.min_requests + static_cast<std::size_t>(extra));

    // Successive sampling without replacement: a user requests a content once.
    std::vector<std::pair<double, std::uint32_t>> keys;
    keys.reserve(spec.content_count);
    std::vector<double> score(spec.content_count + 1);
    for (const auto& [cid, c] : ds.contents) {
      const double s = affinity(pref, c.info);
      score[raw(cid)] = s;
      double r = rng.uniform();
      while (r <= 0.0) r = rng.uniform();
      keys.emplace_back(std::log(r) / std::exp(spec.preference_scale * s), raw(cid));
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_req), keys.end(),
                      std::greater<>());

    double t = static_cast<double>(kEpoch) + rng.uniform(0.0, 180.0 * kDay);
    for (std::size_t k = 0; k < n_req; ++k) {
      const std::uint32_t cid = keys[k].second;
      t += 1.0 + kDay * -std::log(std::max(rng.uniform(), 1e-12));
      const double noisy = 3.0 + 0.8 * score[cid] + 0.7 * rng.normal();
      RequestRecord r;
      r.user = UserId{uid};
      r.content = ContentId{cid};
      r.rating = static_cast<int>(std::clamp(std::lround(noisy), 1L, 5L));
      r.timestamp = static_cast<std::int64_t>(t);
      ds.requests.push_back(r);
    }
    ds.users.emplace(UserId{uid}, std::move(u));
    out.topology.local_users[fap].push_back(UserId{uid});
  }
  for (auto& users : out.topology.local_users) std::sort(users.begin(), users.end());
  // Interleave users chronologically, as in a real ratings log.
  std::stable_sort(ds.requests.begin(), ds.requests.end(),
                   [](const RequestRecord& a, const RequestRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  return out;
}

SyntheticCorpus synthesize_dataset(std::size_t user_count, std::size_t content_count,
                                   std::size_t fap_count, std::size_t cluster_count,
                                   std::uint64_t seed) {
  SyntheticSpec spec;
  spec.user_count = user_count;
  spec.content_count = content_count;
  spec.fap_count = fap_count;
  spec.cluster_count = cluster_count;
  spec.seed = seed;
  return synthesize_dataset(spec);
}

std::vector<double> request_distribution(const Dataset& dataset,
                                         const std::vector<double>& preference,
                                         double preference_scale) {
  std::vector<double> p;
  p.reserve(dataset.contents.size());
  for (const auto& [id, c] : dataset.contents) {
    p.push_back(std::exp(preference_scale * affinity(preference, c.info)));
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= total;
  return p;
}

}  // namespace fogpop
