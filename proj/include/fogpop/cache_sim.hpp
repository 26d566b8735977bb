#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fogpop/cfl.hpp"
#include "fogpop/dataset.hpp"
#include "fogpop/dcnn.hpp"
#include "fogpop/features.hpp"
#include "fogpop/mobile.hpp"
#include "fogpop/popularity.hpp"
#include "fogpop/topology.hpp"

namespace fogpop {

struct HitCount {
  std::size_t hits = 0;
  std::size_t requests = 0;

  // Undefined for zero requests.
  std::optional<double> rate() const;
  HitCount& operator+=(const HitCount& other) {
    hits += other.hits;
    requests += other.requests;
    return *this;
  }
  friend bool operator==(const HitCount&, const HitCount&) = default;
};

// Requests (library indices) served from the cache described by `psi`.
HitCount count_hits(std::span<const std::uint8_t> psi, std::span<const std::size_t> requests);

std::optional<double> hit_rate(const CacheDecision& cache, std::span<const std::size_t> requests);

// Mobile users currently at each F-AP, per window. Every mobile user is placed
// on a uniformly drawn F-AP, independently per window.
std::vector<Associations> simulate_mobility(const Topology& topology, std::size_t window_count,
                                            std::uint64_t seed);

// Test requests replayed in one window, attributed to the serving F-AP.
struct EvalWindow {
  std::size_t index = 0;
  std::vector<std::vector<std::size_t>> requests;        // per F-AP, library indices
  std::vector<std::vector<std::int64_t>> timestamps;     // parallel to `requests`
  std::vector<std::vector<RequestRecord>> mobile_requests;  // per mobile user (topology order)
};

// Splits the time-sorted test requests into `window_count` equal-count
// chronological slices. Locals are served by their home F-AP, mobile users by
// the F-AP they visit in that window (`topology.associations`).
std::vector<EvalWindow> build_windows(std::span<const RequestRecord> test, const Library& library,
                                      const Topology& topology, std::size_t window_count);

// Request counts and latest request time per library content.
class RequestHistory {
 public:
  explicit RequestHistory(std::size_t library_size)
      : counts_(library_size, 0), last_(library_size, kNever) {}

  void record(std::size_t content, std::int64_t timestamp);

  std::span<const std::size_t> counts() const { return counts_; }
  // Latest timestamp, or kNever for unseen contents.
  std::span<const std::int64_t> last_seen() const { return last_; }

  static constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::min();

 private:
  std::vector<std::size_t> counts_;
  std::vector<std::int64_t> last_;
};

// Most frequently requested contents; ties and unseen contents by lower id.
CacheDecision lfu_policy(const RequestHistory& history, std::size_t capacity);
// Most recently requested contents; ties and unseen contents by lower id.
CacheDecision lru_policy(const RequestHistory& history, std::size_t capacity);

enum class Policy { dcnn_cfl, dcnn_fl, dcnn_lc, lfu, lru };

Policy parse_policy(std::string_view name);
std::string to_string(Policy policy);
inline bool is_dcnn(Policy p) { return p == Policy::dcnn_cfl || p == Policy::dcnn_fl || p == Policy::dcnn_lc; }

enum class CapacityScope { per_fap, total };

CapacityScope parse_capacity_scope(std::string_view name);
std::string to_string(CapacityScope scope);

// Cache slots of F-AP `fap`. `total` splits the capacity as evenly as
// possible, giving the remainder to the lowest-indexed F-APs.
std::size_t fap_capacity(std::size_t capacity, CapacityScope scope, std::size_t fap,
                         std::size_t fap_count);

struct SimConfig {
  FeatureConfig features;
  std::vector<std::size_t> hidden = {64};
  std::size_t latent = 16;
  TrainConfig train;
  CflConfig cfl;
  FtrlConfig ftrl;
  double staleness_threshold = 0.8;
  std::size_t window_count = 10;
  double train_fraction = 0.8;
  CapacityScope capacity_scope = CapacityScope::total;
  // DCNN-FL and DCNN-LC use local popularity only unless this is set.
  bool integrate_mobile_for_baselines = false;

  void validate() const;
};

// Everything a policy run needs that does not depend on the policy: split,
// windows, per-F-AP features and training sets, and mobile popularity reports.
struct Scenario {
  SimConfig config;
  std::uint64_t seed = 0;
  double mobile_ratio = 0.0;
  Library library;
  Topology topology;  // with per-window associations
  std::vector<EvalWindow> windows;
  std::vector<FapRequests> scopes;
  std::vector<FapFeatures> features;
  std::vector<TrainingSet> training;
  std::vector<ActivityProfile> activity;
  std::vector<std::vector<MobilePopularity>> mobile;  // [fap][window]
  std::vector<std::vector<std::size_t>> mobile_counts;  // [fap][window]
  std::vector<RequestHistory> warm_history;  // per F-AP, local training requests
  std::size_t test_request_count = 0;
  ShapeSpec shape;

  std::size_t fap_count() const { return topology.fap_count; }
};

// `topology` carries the home assignment and mobile designation; associations
// are simulated here.
Scenario build_scenario(const Dataset& dataset, const Topology& topology, double mobile_ratio,
                        const SimConfig& config, std::uint64_t seed);

struct TrainingSummary {
  std::size_t rounds = 0;
  StopReason reason = StopReason::max_rounds;
  std::vector<std::vector<std::size_t>> clusters;  // F-AP groups sharing a model
  std::vector<RoundLogRow> log;                    // CFL only
  std::optional<ClusterPartition> partition;
};

struct PolicyResult {
  Policy policy = Policy::lfu;
  std::size_t capacity = 0;
  double mobile_ratio = 0.0;
  std::vector<std::vector<HitCount>> cells;  // [fap][window]

  HitCount total() const;
  // Request-weighted hit rate over all F-APs and windows.
  std::optional<double> aggregate() const;
  // Unweighted mean over F-APs of each F-AP's request-weighted hit rate.
  std::optional<double> mean_over_faps() const;
};

using PopularityObserver =
    std::function<void(const PopularityTable&, std::size_t capacity, const CacheDecision&)>;

struct PolicyRun {
  std::vector<PolicyResult> results;  // one per capacity, in input order
  TrainingSummary training;
};

// Trains once (DCNN policies) and replays every window for each capacity.
PolicyRun run_policy(const Scenario& scenario, Policy policy,
                     std::span<const std::size_t> capacities,
                     const PopularityObserver& observer = {});

// Per-F-AP parameters after training with the given DCNN policy.
std::vector<std::vector<double>> train_policy_models(const Scenario& scenario, Policy policy,
                                                     TrainingSummary& summary);

// CSV `policy,capacity,mobile_ratio,fap,window,hits,requests,hit_rate`; F-AP
// and window are 1-based; hit_rate is NA for a window without requests.
void write_results_header(std::ostream& out);
void write_results_rows(std::ostream& out, const PolicyResult& result);

}  // namespace fogpop
