#include "fogpop/topology.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fogpop/errors.hpp"
#include "fogpop/rng.hpp"

namespace fogpop {

namespace {

std::vector<UserId> pick_mobiles(std::vector<UserId> users, double mobile_ratio,
                                 std::uint64_t seed) {
  if (!(mobile_ratio >= 0.0 && mobile_ratio <= 1.0)) {
    throw ConfigError("mobile ratio must lie in [0, 1]");
  }
  std::sort(users.begin(), users.end());
  Rng rng(derive_seed(seed, "mobile"));
  rng.shuffle(std::span<UserId>(users));
  const auto count = static_cast<std::size_t>(
      std::floor(mobile_ratio * static_cast<double>(users.size()) + 1e-9));
  users.resize(std::min(count, users.size()));
  std::sort(users.begin(), users.end());
  return users;
}

Topology assemble(std::size_t fap_count, const std::map<UserId, std::size_t>& home,
                  std::vector<UserId> mobiles) {
  Topology t;
  t.fap_count = fap_count;
  t.local_users.resize(fap_count);
  t.mobile_users = std::move(mobiles);
  for (const auto& [user, fap] : home) {
    if (!std::binary_search(t.mobile_users.begin(), t.mobile_users.end(), user)) {
      t.local_users[fap].push_back(user);
    }
  }
  for (std::size_t m = 0; m < fap_count; ++m) {
    if (t.local_users[m].empty()) {
      throw ConfigError("F-AP " + std::to_string(m + 1) +
                        " has no local users; lower the F-AP count or the mobile ratio");
    }
  }
  return t;
}

}  // namespace

std::optional<std::size_t> Topology::home_of(UserId user) const {
  for (std::size_t m = 0; m < local_users.size(); ++m) {
    if (std::binary_search(local_users[m].begin(), local_users[m].end(), user)) return m;
  }
  return std::nullopt;
}

bool Topology::is_mobile(UserId user) const {
  return std::binary_search(mobile_users.begin(), mobile_users.end(), user);
}

void Topology::validate(const Dataset& dataset) const {
  if (local_users.size() != fap_count) throw ValidationError("local user table size != M");
  std::set<UserId> seen;
  for (const auto& users : local_users) {
    for (const auto u : users) {
      if (!seen.insert(u).second) throw ValidationError("user assigned to two F-APs");
    }
  }
  for (const auto u : mobile_users) {
    if (!seen.insert(u).second) throw ValidationError("user both local and mobile");
  }
  if (seen.size() != dataset.users.size()) throw ValidationError("topology does not cover users");
  for (const auto& [id, info] : dataset.users) {
    if (!seen.contains(id)) throw ValidationError("user missing from topology");
  }
  for (const auto& window : associations) {
    if (window.size() != fap_count) throw ValidationError("association table size != M");
    std::set<UserId> placed;
    for (const auto& users : window) {
      for (const auto u : users) {
        if (!is_mobile(u) || !placed.insert(u).second) {
          throw ValidationError("association must place each mobile user exactly once");
        }
      }
    }
    if (placed.size() != mobile_users.size()) {
      throw ValidationError("association must place each mobile user exactly once");
    }
  }
}

SkewMode parse_skew_mode(std::string_view name) {
  if (name == "uniform") return SkewMode::uniform;
  if (name == "genre") return SkewMode::genre;
  throw ConfigError("unknown skew mode '" + std::string(name) + "'");
}

Topology build_topology(const Dataset& dataset, std::size_t fap_count, double mobile_ratio,
                        SkewMode skew_mode, std::uint64_t seed) {
  if (fap_count == 0) throw ConfigError("F-AP count must be positive");
  std::vector<UserId> users;
  for (const auto& [id, info] : dataset.users) users.push_back(id);

  auto mobiles = pick_mobiles(users, mobile_ratio, seed);
  if (fap_count > users.size() - mobiles.size()) {
    throw ConfigError("F-AP count exceeds the number of local users");
  }

  std::map<UserId, std::size_t> home;
  if (skew_mode == SkewMode::uniform) {
    Rng rng(derive_seed(seed, "topology"));
    rng.shuffle(std::span<UserId>(users));
    for (std::size_t k = 0; k < users.size(); ++k) home[users[k]] = k % fap_count;
  } else {
    std::map<UserId, std::vector<std::size_t>> genre_counts;
    for (const auto& r : dataset.requests) {
      auto& counts = genre_counts[r.user];
      const auto& info = dataset.contents.at(r.content).info;
      if (counts.empty()) counts.assign(info.size(), 0);
      for (std::size_t g = 0; g < info.size(); ++g) {
        if (info[g] > 0.0) ++counts[g];
      }
    }
    std::map<std::size_t, std::vector<UserId>> groups;
    for (const auto u : users) {
      std::size_t best = 0;
      if (const auto it = genre_counts.find(u); it != genre_counts.end()) {
        const auto& c = it->second;
        best = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
      }
      groups[best].push_back(u);
    }
    // Groups are laid out in genre order and dealt to F-APs as contiguous,
    // equally sized runs, so every F-AP is dominated by one or two genres and
    // none is left empty when there are fewer groups than F-APs.
    std::vector<UserId> ordered;
    for (const auto& [genre, members] : groups) {
      ordered.insert(ordered.end(), members.begin(), members.end());
    }
    for (std::size_t k = 0; k < ordered.size(); ++k) home[ordered[k]] = k * fap_count / ordered.size();
  }
  return assemble(fap_count, home, std::move(mobiles));
}

Topology designate_mobiles(const Topology& all_local, double mobile_ratio, std::uint64_t seed) {
  std::map<UserId, std::size_t> home;
  std::vector<UserId> users;
  for (std::size_t m = 0; m < all_local.fap_count; ++m) {
    for (const auto u : all_local.local_users[m]) {
      home[u] = m;
      users.push_back(u);
    }
  }
  if (!all_local.mobile_users.empty()) {
    throw ConfigError("designate_mobiles expects a topology without mobile users");
  }
  return assemble(all_local.fap_count, home, pick_mobiles(std::move(users), mobile_ratio, seed));
}

}  // namespace fogpop
