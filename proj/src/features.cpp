#include "fogpop/features.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "fogpop/errors.hpp"

namespace fogpop {

namespace {

double similarity_from(double weighted_sq_sum, std::size_t common) {
  if (common == 0) return 0.0;
  return 1.0 / (1.0 + std::sqrt(weighted_sq_sum / static_cast<double>(common)));
}

double log_ratio(std::size_t total, std::size_t part) {
  return std::log(static_cast<double>(total) / static_cast<double>(part));
}

// Merge-walks two index-sorted rating lists, applying `weight(index)` to every
// squared rating difference on a shared index.
template <typename Weight>
double merged_similarity(std::span<const FapRequests::Entry> a,
                         std::span<const FapRequests::Entry> b, Weight&& weight) {
  double sum = 0.0;
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->index < ib->index) {
      ++ia;
    } else if (ib->index < ia->index) {
      ++ib;
    } else {
      const double d = ia->rating - ib->rating;
      sum += weight(ia->index) * (d * d);
      ++common;
      ++ia;
      ++ib;
    }
  }
  return similarity_from(sum, common);
}

// Row-wise similarity of `owner` to every entity sharing an index with it.
// `outer` lists (index, rating) of the owner; `inner(index)` lists the
// entities touching that index. Accumulates in increasing shared-index order,
// matching merged_similarity bit for bit.
template <typename Inner, typename Weight>
std::vector<Neighbor> similarity_row(std::size_t owner, std::span<const FapRequests::Entry> outer,
                                     Inner&& inner, Weight&& weight, std::vector<double>& sum,
                                     std::vector<std::uint32_t>& common,
                                     std::vector<std::uint32_t>& touched) {
  touched.clear();
  for (const auto& e : outer) {
    const double w = weight(e.index);
    for (const auto& other : inner(e.index)) {
      if (other.index == owner) continue;
      if (common[other.index] == 0) touched.push_back(other.index);
      const double d = e.rating - other.rating;
      sum[other.index] += w * (d * d);
      ++common[other.index];
    }
  }
  std::vector<Neighbor> out;
  out.reserve(touched.size());
  for (const auto k : touched) {
    out.push_back({k, similarity_from(sum[k], common[k])});
    sum[k] = 0.0;
    common[k] = 0;
  }
  return out;
}

}  // namespace

FapRequests::FapRequests(std::span<const RequestRecord> requests,
                         std::span<const UserId> local_users, const Library& library)
    : users_(local_users.begin(), local_users.end()),
      by_user_(local_users.size()),
      by_content_(library.size()),
      request_counts_(local_users.size(), 0) {
  std::sort(users_.begin(), users_.end());
  for (const auto& r : requests) {
    const auto it = std::lower_bound(users_.begin(), users_.end(), r.user);
    if (it == users_.end() || *it != r.user) continue;
    const auto u = static_cast<std::size_t>(it - users_.begin());
    const auto i = library.index(r.content);
    by_user_[u].push_back({static_cast<std::uint32_t>(i), r.rating / 5.0});
    ++request_counts_[u];
  }
  for (std::size_t u = 0; u < by_user_.size(); ++u) {
    auto& list = by_user_[u];
    // A repeated request keeps its latest rating.
    std::stable_sort(list.begin(), list.end(),
                     [](const Entry& a, const Entry& b) { return a.index < b.index; });
    std::vector<Entry> dedup;
    for (const auto& e : list) {
      if (!dedup.empty() && dedup.back().index == e.index) {
        dedup.back() = e;
      } else {
        dedup.push_back(e);
      }
    }
    list = std::move(dedup);
    for (const auto& e : list) {
      by_content_[e.index].push_back({static_cast<std::uint32_t>(u), e.rating});
    }
  }
}

double irfu(std::size_t content, const FapRequests& scope) {
  const auto requesters = scope.content_ratings(content).size();
  if (requesters == 0) throw ValidationError("irfu undefined for a content nobody requested");
  return log_ratio(scope.user_count(), requesters);
}

double irfc(std::size_t user, const FapRequests& scope) {
  const auto requested = scope.user_ratings(user).size();
  if (requested == 0) throw ValidationError("irfc undefined for a user without requests");
  return log_ratio(scope.library_size(), requested);
}

double user_similarity(std::size_t u, std::size_t v, const FapRequests& scope) {
  if (u == v) throw ValidationError("self-similarity is not defined");
  return merged_similarity(scope.user_ratings(u), scope.user_ratings(v),
                           [&](std::uint32_t i) { return irfu(i, scope); });
}

double content_similarity(std::size_t i, std::size_t j, const FapRequests& scope) {
  if (i == j) throw ValidationError("self-similarity is not defined");
  return merged_similarity(scope.content_ratings(i), scope.content_ratings(j),
                           [&](std::uint32_t u) { return irfc(u, scope); });
}

NeighborSet select_neighbors(std::uint32_t owner, std::vector<Neighbor> candidates,
                             std::size_t T) {
  std::erase_if(candidates,
                [&](const Neighbor& n) { return n.id == owner || !(n.similarity > 0.0); });
  const auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  };
  if (candidates.size() > T) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(T),
                      candidates.end(), better);
    candidates.resize(T);
  } else {
    std::sort(candidates.begin(), candidates.end(), better);
  }
  return {owner, std::move(candidates)};
}

std::vector<double> initial_feature(std::span<const double> self,
                                    std::span<const std::span<const double>> neighbors,
                                    double self_weight) {
  if (!(self_weight >= 0.0 && self_weight <= 1.0)) {
    throw ValidationError("self weight must lie in [0, 1]");
  }
  for (const auto& n : neighbors) {
    if (n.size() != self.size()) throw ValidationError("neighbor information dimension mismatch");
  }
  std::vector<double> x(self.begin(), self.end());
  if (neighbors.empty() || self_weight == 1.0) return x;
  for (std::size_t d = 0; d < self.size(); ++d) {
    double sum = 0.0;
    double lo = neighbors[0][d];
    double hi = lo;
    for (const auto& n : neighbors) {
      sum += n[d];
      lo = std::min(lo, n[d]);
      hi = std::max(hi, n[d]);
    }
    // The exact mean lies in [lo, hi]; clamping removes summation round-off.
    const double mean = std::clamp(sum / static_cast<double>(neighbors.size()), lo, hi);
    x[d] = mean + self_weight * (self[d] - mean);
  }
  return x;
}

FapFeatures build_fap_features(const FapRequests& scope, const Dataset& dataset,
                               const Library& library, const FeatureConfig& config) {
  const std::size_t n_users = scope.user_count();
  const std::size_t n_items = scope.library_size();
  FapFeatures out;
  out.users.assign(scope.users().begin(), scope.users().end());

  std::vector<double> item_weight(n_items, 0.0);
  for (std::size_t i = 0; i < n_items; ++i) {
    if (!scope.content_ratings(i).empty()) item_weight[i] = irfu(i, scope);
  }
  std::vector<double> user_weight(n_users, 0.0);
  for (std::size_t u = 0; u < n_users; ++u) {
    if (!scope.user_ratings(u).empty()) user_weight[u] = irfc(u, scope);
  }

  std::vector<std::uint32_t> touched;
  {
    std::vector<double> sum(n_users, 0.0);
    std::vector<std::uint32_t> common(n_users, 0);
    for (std::size_t u = 0; u < n_users; ++u) {
      auto row = similarity_row(
          u, scope.user_ratings(u), [&](std::uint32_t i) { return scope.content_ratings(i); },
          [&](std::uint32_t i) { return item_weight[i]; }, sum, common, touched);
      out.user_neighbors.push_back(
          select_neighbors(static_cast<std::uint32_t>(u), std::move(row), config.neighbors));
    }
  }
  {
    std::vector<double> sum(n_items, 0.0);
    std::vector<std::uint32_t> common(n_items, 0);
    for (std::size_t i = 0; i < n_items; ++i) {
      auto row = similarity_row(
          i, scope.content_ratings(i), [&](std::uint32_t u) { return scope.user_ratings(u); },
          [&](std::uint32_t u) { return user_weight[u]; }, sum, common, touched);
      out.content_neighbors.push_back(
          select_neighbors(static_cast<std::uint32_t>(i), std::move(row), config.neighbors));
    }
  }

  std::vector<std::span<const double>> user_info(n_users);
  for (std::size_t u = 0; u < n_users; ++u) user_info[u] = dataset.users.at(out.users[u]).info;
  out.user_features.rows = n_users;
  out.user_features.cols = n_users ? user_info[0].size() : 0;
  out.content_features.rows = n_items;
  out.content_features.cols = library.dim();

  std::vector<std::span<const double>> nb;
  for (std::size_t u = 0; u < n_users; ++u) {
    nb.clear();
    for (const auto& n : out.user_neighbors[u].members) nb.push_back(user_info[n.id]);
    const auto x = initial_user_feature(user_info[u], nb, config.self_weight);
    out.user_features.values.insert(out.user_features.values.end(), x.begin(), x.end());
  }
  for (std::size_t i = 0; i < n_items; ++i) {
    nb.clear();
    for (const auto& n : out.content_neighbors[i].members) nb.push_back(library.info(n.id));
    const auto chi = initial_content_feature(library.info(i), nb, config.self_weight);
    out.content_features.values.insert(out.content_features.values.end(), chi.begin(), chi.end());
  }
  return out;
}

void write_neighbor_csv(std::ostream& out, std::size_t fap, const FapFeatures& features,
                        const Library& library) {
  for (const auto& set : features.user_neighbors) {
    for (const auto& n : set.members) {
      out << "fap" << fap + 1 << "-users," << raw(features.users[set.owner]) << ','
          << raw(features.users[n.id]) << ',' << n.similarity << '\n';
    }
  }
  for (const auto& set : features.content_neighbors) {
    for (const auto& n : set.members) {
      out << "fap" << fap + 1 << "-contents," << raw(library.id(set.owner)) << ','
          << raw(library.id(n.id)) << ',' << n.similarity << '\n';
    }
  }
}

}  // namespace fogpop
