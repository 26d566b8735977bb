#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fogpop/dcnn.hpp"
#include "fogpop/features.hpp"
#include "fogpop/mobile.hpp"

namespace fogpop {

// Share s_u of each local user in its F-AP's training requests.
struct ActivityProfile {
  std::vector<UserId> users;  // same order as FapRequests::users()
  std::vector<std::size_t> request_counts;
  std::vector<double> levels;
};

ActivityProfile activity_levels(const FapRequests& scope);

// P_i = sum_u s_u * p_ui over the library, p_ui from the F-AP's model.
std::vector<double> local_popularity(const DcnnModel& model, const FapFeatures& features,
                                     const ActivityProfile& activity);

struct Distribution {
  std::vector<double> values;
  bool defined = false;
};

// v / sum(v); an all-zero input stays zero and is flagged undefined.
Distribution normalize(std::span<const double> values);

// (1 - w) * local + w * mobile, falling back to the defined side when the
// other is undefined.
std::vector<double> integrate(const Distribution& local, const Distribution& mobile,
                              double mobile_weight);

// |K| / (|K| + |L|); 0 when both are empty.
double mobile_weight(std::size_t mobile_count, std::size_t local_count);

struct CacheDecision {
  std::vector<std::size_t> cached;  // library indices, ascending
  std::vector<std::uint8_t> psi;    // indicator over the library
};

// Top-`capacity` entries of `scores`, ties to the lower index.
CacheDecision select_cache(std::span<const double> scores, std::size_t capacity);

struct PopularityTable {
  std::size_t fap = 0;
  std::size_t window = 0;
  std::vector<double> local;
  std::vector<double> mobile;
  std::vector<double> integrated;
  double w = 0.0;
  bool local_defined = false;
  bool mobile_defined = false;
};

// Normalizes both parts and integrates them with w = |K| / (|K| + |L|).
PopularityTable build_popularity_table(std::size_t fap, std::size_t window,
                                       std::span<const double> local_raw,
                                       const MobilePopularity& mobile, std::size_t mobile_count,
                                       std::size_t local_count);

// CSV rows `fap,window,content,local,mobile,integrated,cached` with 1-based
// F-AP and window numbers and raw content ids.
void write_popularity_header(std::ostream& out);
void write_popularity_rows(std::ostream& out, const PopularityTable& table,
                           const CacheDecision& cache, const Library& library);

}  // namespace fogpop
