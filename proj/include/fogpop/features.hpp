#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fogpop/dataset.hpp"

namespace fogpop {

// Ratings observed within one F-AP's scope (its local users' requests),
// indexed densely: users by position in `users`, contents by library index.
// Ratings are stored scaled to [0, 1] by r / 5.
class FapRequests {
 public:
  struct Entry {
    std::uint32_t index;  // content index in user lists, user index in content lists
    double rating;
  };

  FapRequests(std::span<const RequestRecord> requests, std::span<const UserId> local_users,
              const Library& library);

  std::size_t user_count() const { return users_.size(); }
  std::size_t library_size() const { return by_content_.size(); }
  std::span<const UserId> users() const { return users_; }
  std::span<const Entry> user_ratings(std::size_t user) const { return by_user_[user]; }
  std::span<const Entry> content_ratings(std::size_t content) const {
    return by_content_[content];
  }
  std::size_t request_count(std::size_t user) const { return request_counts_[user]; }

 private:
  std::vector<UserId> users_;
  std::vector<std::vector<Entry>> by_user_;     // sorted by content index
  std::vector<std::vector<Entry>> by_content_;  // sorted by user index
  std::vector<std::size_t> request_counts_;
};

// ln(U / U_i): U local users, U_i of them requested content i. U_i must be > 0.
double irfu(std::size_t content, const FapRequests& scope);
// ln(I / I_u): I library size, I_u contents requested by user u. I_u must be > 0.
double irfc(std::size_t user, const FapRequests& scope);

// 1 / (1 + sqrt(mean_{i in C} irfu(i) * (r_ui - r_vi)^2)) over co-requested C;
// 0 when C is empty. u != v.
double user_similarity(std::size_t u, std::size_t v, const FapRequests& scope);
// Mirror of user_similarity over co-requesting users weighted by irfc.
double content_similarity(std::size_t i, std::size_t j, const FapRequests& scope);

struct Neighbor {
  std::uint32_t id;
  double similarity;
};

struct NeighborSet {
  std::uint32_t owner;
  std::vector<Neighbor> members;  // descending similarity, ties by lower id
};

// Top-T candidates by similarity; zero-similarity candidates and the owner are dropped.
NeighborSet select_neighbors(std::uint32_t owner, std::vector<Neighbor> candidates,
                             std::size_t T);

// w * self + (1 - w) * mean(neighbors); self when there are no neighbors.
std::vector<double> initial_feature(std::span<const double> self,
                                    std::span<const std::span<const double>> neighbors,
                                    double self_weight);

inline std::vector<double> initial_user_feature(std::span<const double> xi,
                                                std::span<const std::span<const double>> neighbors,
                                                double self_weight) {
  return initial_feature(xi, neighbors, self_weight);
}

inline std::vector<double> initial_content_feature(
    std::span<const double> zeta, std::span<const std::span<const double>> neighbors,
    double self_weight) {
  return initial_feature(zeta, neighbors, self_weight);
}

// Row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
};

// Initial features of one F-AP: one row per local user (order of
// FapRequests::users()) and one row per library content.
struct FapFeatures {
  std::vector<UserId> users;
  FeatureMatrix user_features;
  FeatureMatrix content_features;
  std::vector<NeighborSet> user_neighbors;     // owner = user index
  std::vector<NeighborSet> content_neighbors;  // owner = content index
};

struct FeatureConfig {
  std::size_t neighbors = 20;  // T
  double self_weight = 0.5;    // w_N
};

FapFeatures build_fap_features(const FapRequests& scope, const Dataset& dataset,
                               const Library& library, const FeatureConfig& config);

// Debug dump rows `scope,owner,neighbor,similarity` with raw user/content ids.
void write_neighbor_csv(std::ostream& out, std::size_t fap, const FapFeatures& features,
                        const Library& library);

}  // namespace fogpop
