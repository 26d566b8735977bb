#pragma once

#include <cstdint>
#include <vector>

#include "fogpop/dataset.hpp"
#include "fogpop/topology.hpp"

namespace fogpop {

// Generator knobs. Every F-AP is assigned one of `cluster_count` latent
// genre-preference profiles; its users draw demographics and requests from it.
struct SyntheticSpec {
  std::size_t user_count = 600;
  std::size_t content_count = 400;
  std::size_t fap_count = 6;
  std::size_t cluster_count = 2;
  double mean_requests = 40.0;     // per user, including the minimum
  std::size_t min_requests = 10;
  double preference_scale = 2.5;   // sharpness of the request distribution
  double user_spread = 0.35;       // per-user deviation from the profile
  double demographic_effect = 0.35;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  Dataset dataset;
  Topology topology;  // planted: every user local to its home F-AP
  // Planted F-AP clusters, each sorted, ordered by lowest member.
  std::vector<std::vector<std::size_t>> ground_truth_clusters;
  std::vector<std::size_t> fap_profile;           // profile index per F-AP
  std::vector<std::vector<double>> profile_preference;  // per profile, over genres
};

SyntheticCorpus synthesize_dataset(const SyntheticSpec& spec);

SyntheticCorpus synthesize_dataset(std::size_t user_count, std::size_t content_count,
                                   std::size_t fap_count, std::size_t cluster_count,
                                   std::uint64_t seed);

// Request distribution over the library (content-id order) of a user whose
// preference equals `preference` exactly. Stationary reference for oracles.
std::vector<double> request_distribution(const Dataset& dataset,
                                         const std::vector<double>& preference,
                                         double preference_scale);

}  // namespace fogpop
