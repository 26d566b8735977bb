#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fogpop/dcnn.hpp"

namespace fogpop {

struct ClientState {
  std::size_t fap = 0;
  std::vector<double> theta;
  std::vector<double> delta;
  std::size_t sample_count = 0;
};

struct CflConfig {
  double eps1 = 0.01;  // FL stopping coefficient
  double eps2 = 0.016;  // clustering coefficient
  std::size_t max_rounds = 200;
  // Compare ||.||_2 / sqrt(parameter count) against eps1/eps2.
  bool normalize_norms = true;
  // Local updates of one round run on up to this many threads.
  std::size_t workers = 1;

  void validate() const;
};

// Local optimizer run by F-AP `fap` from `theta` in round `round`; returns the
// weight update (trained parameters minus theta).
using LocalTrainer = std::function<std::vector<double>(std::size_t fap,
                                                       std::span<const double> theta,
                                                       std::size_t round)>;

// Euclidean norm, optionally divided by sqrt(length).
double update_norm(std::span<const double> v, bool normalize);

// Sum over clients of (|A^m| / |A^phi|) * delta_m.
std::vector<double> weighted_update(std::span<const ClientState> clients);

enum class StopReason { converged, max_rounds };

std::string to_string(StopReason reason);

struct FlResult {
  std::vector<double> theta;
  std::size_t rounds = 0;
  StopReason reason = StopReason::max_rounds;
};

// Federated averaging within one cluster: broadcast, local training, weighted
// aggregation, until the aggregated update norm falls below eps1.
// `sample_counts` is indexed by F-AP.
FlResult run_fl(std::span<const std::size_t> members, std::span<const std::size_t> sample_counts,
                std::vector<double> theta_init, const LocalTrainer& train,
                const CflConfig& config);

// <a, b> / (|a| |b|); 0 (with a warning) when either norm is zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// ||delta_phi|| < eps1 and max_m ||delta_m|| > eps2 and at least two members.
bool should_split(std::span<const ClientState> cluster, double eps1, double eps2,
                  bool normalize_norms = true);

// Symmetric matrix over cluster positions 0..n-1.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    values_[i * n_ + j] = v;
    values_[j * n_ + i] = v;
  }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

SimilarityMatrix pairwise_similarity(std::span<const ClientState> cluster);

struct Bipartition {
  std::vector<std::size_t> first;   // positions; contains position 0
  std::vector<std::size_t> second;
  double max_cross_similarity = 0.0;
};

inline constexpr std::size_t kMaxBipartitionSize = 20;

// Exhaustive min-max bipartition. Ties: larger smaller side first, then the
// lexicographically smallest side containing position 0.
Bipartition optimal_bipartition(const SimilarityMatrix& similarity);

// theta_m += mean of member updates (unweighted), for every member.
void cluster_aggregate(std::span<ClientState> cluster);

struct Cluster {
  std::size_t id = 0;
  std::vector<std::size_t> members;  // F-AP indices, sorted
};

struct ClusterPartition {
  std::vector<Cluster> clusters;
  std::vector<std::vector<double>> theta;  // per F-AP specialized parameters

  std::size_t cluster_of(std::size_t fap) const;
  // Member sets only, sorted by lowest member.
  std::vector<std::vector<std::size_t>> groups() const;
};

struct RoundLogRow {
  std::size_t round = 0;
  std::size_t cluster_id = 0;
  std::vector<std::size_t> members;
  double update_norm = 0.0;
  double max_member_norm = 0.0;
  bool split = false;
};

struct SplitEvent {
  std::size_t round = 0;
  std::size_t parent = 0;
  std::size_t first_child = 0;
  std::size_t second_child = 0;
};

struct CflResult {
  ClusterPartition partition;
  std::size_t rounds = 0;
  StopReason reason = StopReason::max_rounds;
  std::vector<RoundLogRow> log;
  std::vector<SplitEvent> splits;
};

// Recursive clustered FL over F-APs 0..fap_count-1, all starting from theta_init.
// Converged when every cluster has ||delta_phi|| < eps1 and max member norm < eps2.
CflResult run_cfl(std::size_t fap_count, std::span<const std::size_t> sample_counts,
                  const std::vector<double>& theta_init, const LocalTrainer& train,
                  const CflConfig& config);

// CSV rows `round,cluster_id,member_ids,update_norm,max_member_norm,split`;
// member ids are 1-based and ';'-separated.
void write_round_log(std::ostream& out, std::span<const RoundLogRow> log);

// Partition plus per-F-AP parameters, reusing the DCNN checkpoint format.
void write_partition_checkpoint(std::ostream& out, const ClusterPartition& partition,
                                const ShapeSpec& shape);
ClusterPartition read_partition_checkpoint(std::istream& in);

}  // namespace fogpop
