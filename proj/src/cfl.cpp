#include "fogpop/cfl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "fogpop/errors.hpp"

namespace fogpop {

namespace {

// Runs fn(k) for k in [0, n) on up to `workers` threads. The first exception
// thrown by any job is rethrown once all threads have joined.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void check_finite(std::span<const double> v, const std::string& what) {
  for (const double x : v) {
    if (!std::isfinite(x)) throw NumericError("non-finite value in " + what);
  }
}

std::vector<std::vector<double>> collect_updates(std::span<const std::size_t> faps,
                                                 const std::vector<std::vector<double>>& theta,
                                                 std::size_t round, const LocalTrainer& train,
                                                 std::size_t workers) {
  std::vector<std::vector<double>> deltas(faps.size());
  parallel_for(faps.size(), workers, [&](std::size_t k) {
    const std::size_t m = faps[k];
    deltas[k] = train(m, theta[k], round);
    if (deltas[k].size() != theta[k].size()) {
      throw ValidationError("F-AP " + std::to_string(m + 1) + " returned an update of length " +
                            std::to_string(deltas[k].size()));
    }
    check_finite(deltas[k], "weight update of F-AP " + std::to_string(m + 1));
  });
  return deltas;
}

}  // namespace

void CflConfig::validate() const {
  if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) throw ConfigError("eps1 and eps2 must be non-negative");
  if (max_rounds == 0) throw ConfigError("max_rounds must be positive");
  if (eps2 <= eps1) {
    spdlog::warn("eps2 ({}) <= eps1 ({}): clusters with identical members may split", eps2, eps1);
  }
}

double update_norm(std::span<const double> v, bool normalize) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  const double n = std::sqrt(s);
  if (!normalize || v.empty()) return n;
  return n / std::sqrt(static_cast<double>(v.size()));
}

std::vector<double> weighted_update(std::span<const ClientState> clients) {
  if (clients.empty()) throw ValidationError("cannot aggregate an empty cluster");
  std::size_t total = 0;
  for (const auto& c : clients) {
    if (c.delta.size() != clients.front().delta.size()) {
      throw ValidationError("clients disagree on parameter length");
    }
    total += c.sample_count;
  }
  if (total == 0) throw ValidationError("cluster has no training samples");
  std::vector<double> out(clients.front().delta.size(), 0.0);
  for (const auto& c : clients) {
    const double w = static_cast<double>(c.sample_count) / static_cast<double>(total);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * c.delta[k];
  }
  return out;
}

std::string to_string(StopReason reason) {
  return reason == StopReason::converged ? "converged" : "max_rounds";
}

FlResult run_fl(std::span<const std::size_t> members, std::span<const std::size_t> sample_counts,
                std::vector<double> theta_init, const LocalTrainer& train,
                const CflConfig& config) {
  config.validate();
  if (members.empty()) throw ValidationError("cannot run FL on an empty cluster");
  FlResult result;
  result.theta = std::move(theta_init);
  std::vector<ClientState> clients(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    clients[k].fap = members[k];
    clients[k].sample_count = sample_counts[members[k]];
  }
  while (result.rounds < config.max_rounds) {
    const std::vector<std::vector<double>> broadcast(members.size(), result.theta);
    auto deltas = collect_updates(members, broadcast, result.rounds, train, config.workers);
    for (std::size_t k = 0; k < members.size(); ++k) clients[k].delta = std::move(deltas[k]);
    const auto agg = weighted_update(clients);
    for (std::size_t k = 0; k < agg.size(); ++k) result.theta[k] += agg[k];
    check_finite(result.theta, "FL parameters");
    ++result.rounds;
    if (update_norm(agg, config.normalize_norms) < config.eps1) {
      result.reason = StopReason::converged;
      break;
    }
  }
  return result;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("cosine similarity of unequal lengths");
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) {
    spdlog::warn("cosine similarity of a zero-norm update is taken as 0");
    return 0.0;
  }
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

bool should_split(std::span<const ClientState> cluster, double eps1, double eps2,
                  bool normalize_norms) {
  if (cluster.size() < 2) return false;
  const auto agg = weighted_update(cluster);
  if (!(update_norm(agg, normalize_norms) < eps1)) return false;
  double max_norm = 0.0;
  for (const auto& c : cluster) max_norm = std::max(max_norm, update_norm(c.delta, normalize_norms));
  return max_norm > eps2;
}

SimilarityMatrix pairwise_similarity(std::span<const ClientState> cluster) {
  SimilarityMatrix s(cluster.size());
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    s.set(i, i, 1.0);
    for (std::size_t j = i + 1; j < cluster.size(); ++j) {
      s.set(i, j, cosine_similarity(cluster[i].delta, cluster[j].delta));
    }
  }
  return s;
}

Bipartition optimal_bipartition(const SimilarityMatrix& similarity) {
  const std::size_t n = similarity.size();
  if (n < 2) throw ValidationError("bipartition needs at least two members");
  if (n > kMaxBipartitionSize) {
    throw ConfigError("exhaustive bipartition refused for " + std::to_string(n) +
                      " members (limit " + std::to_string(kMaxBipartitionSize) +
                      "); use fewer F-APs per cluster");
  }
  // Bit k-1 of `mask` puts position k on the side of position 0.
  const std::uint32_t full = (1u << (n - 1)) - 1;
  Bipartition best;
  bool have = false;
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  for (std::uint32_t mask = 0; mask < full; ++mask) {
    first.assign(1, 0);
    second.clear();
    for (std::size_t k = 1; k < n; ++k) {
      ((mask >> (k - 1)) & 1u ? first : second).push_back(k);
    }
    double cross = -std::numeric_limits<double>::infinity();
    for (const auto i : first) {
      for (const auto j : second) cross = std::max(cross, similarity(i, j));
    }
    bool better = !have;
    if (have) {
      const auto balance = std::min(first.size(), second.size());
      const auto best_balance = std::min(best.first.size(), best.second.size());
      if (cross != best.max_cross_similarity) {
        better = cross < best.max_cross_similarity;
      } else if (balance != best_balance) {
        better = balance > best_balance;
      } else {
        better = first < best.first;
      }
    }
    if (better) {
      best.first = first;
      best.second = second;
      best.max_cross_similarity = cross;
      have = true;
    }
  }
  return best;
}

void cluster_aggregate(std::span<ClientState> cluster) {
  if (cluster.empty()) return;
  const std::size_t len = cluster.front().delta.size();
  std::vector<double> mean(len, 0.0);
  for (const auto& c : cluster) {
    if (c.delta.size() != len || c.theta.size() != len) {
      throw ValidationError("clients disagree on parameter length");
    }
    for (std::size_t k = 0; k < len; ++k) mean[k] += c.delta[k];
  }
  const double scale = 1.0 / static_cast<double>(cluster.size());
  for (auto& x : mean) x *= scale;
  for (auto& c : cluster) {
    for (std::size_t k = 0; k < len; ++k) c.theta[k] += mean[k];
  }
}

std::size_t ClusterPartition::cluster_of(std::size_t fap) const {
  for (std::size_t g = 0; g < clusters.size(); ++g) {
    const auto& m = clusters[g].members;
    if (std::binary_search(m.begin(), m.end(), fap)) return g;
  }
  throw ValidationError("F-AP " + std::to_string(fap + 1) + " is in no cluster");
}

std::vector<std::vector<std::size_t>> ClusterPartition::groups() const {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& c : clusters) out.push_back(c.members);
  std::sort(out.begin(), out.end());
  return out;
}

CflResult run_cfl(std::size_t fap_count, std::span<const std::size_t> sample_counts,
                  const std::vector<double>& theta_init, const LocalTrainer& train,
                  const CflConfig& config) {
  config.validate();
  if (fap_count == 0) throw ValidationError("CFL needs at least one F-AP");
  CflResult result;
  auto& partition = result.partition;
  partition.theta.assign(fap_count, theta_init);
  Cluster root;
  for (std::size_t m = 0; m < fap_count; ++m) root.members.push_back(m);
  partition.clusters.push_back(std::move(root));
  std::size_t next_id = 1;

  std::vector<std::size_t> all(fap_count);
  for (std::size_t m = 0; m < fap_count; ++m) all[m] = m;

  while (result.rounds < config.max_rounds) {
    const std::size_t round = result.rounds;
    auto deltas = collect_updates(all, partition.theta, round, train, config.workers);

    std::vector<Cluster> next;
    bool converged = true;
    for (const auto& cluster : partition.clusters) {
      std::vector<ClientState> clients;
      for (const auto m : cluster.members) {
        clients.push_back({m, partition.theta[m], deltas[m], sample_counts[m]});
      }
      const double agg_norm = update_norm(weighted_update(clients), config.normalize_norms);
      double max_norm = 0.0;
      for (const auto& c : clients) {
        max_norm = std::max(max_norm, update_norm(c.delta, config.normalize_norms));
      }
      if (!(agg_norm < config.eps1 && max_norm < config.eps2)) converged = false;
      const bool split = should_split(clients, config.eps1, config.eps2, config.normalize_norms);
      result.log.push_back({round, cluster.id, cluster.members, agg_norm, max_norm, split});
      if (!split) {
        next.push_back(cluster);
        continue;
      }
      const auto bp = optimal_bipartition(pairwise_similarity(clients));
      Cluster a{next_id++, {}};
      Cluster b{next_id++, {}};
      for (const auto k : bp.first) a.members.push_back(cluster.members[k]);
      for (const auto k : bp.second) b.members.push_back(cluster.members[k]);
      result.splits.push_back({round, cluster.id, a.id, b.id});
      spdlog::debug("round {}: split cluster {} (max cross similarity {:.4f})", round, cluster.id,
                    bp.max_cross_similarity);
      next.push_back(std::move(a));
      next.push_back(std::move(b));
    }
    partition.clusters = std::move(next);

    for (const auto& cluster : partition.clusters) {
      std::vector<ClientState> clients;
      for (const auto m : cluster.members) {
        clients.push_back({m, std::move(partition.theta[m]), std::move(deltas[m]), 0});
      }
      cluster_aggregate(clients);
      for (auto& c : clients) {
        check_finite(c.theta, "CFL parameters of F-AP " + std::to_string(c.fap + 1));
        partition.theta[c.fap] = std::move(c.theta);
      }
    }
    ++result.rounds;
    if (converged) {
      result.reason = StopReason::converged;
      break;
    }
  }
  return result;
}

void write_round_log(std::ostream& out, std::span<const RoundLogRow> log) {
  out << "round,cluster_id,member_ids,update_norm,max_member_norm,split\n";
  for (const auto& row : log) {
    out << row.round << ',' << row.cluster_id << ',';
    for (std::size_t k = 0; k < row.members.size(); ++k) {
      if (k) out << ';';
      out << row.members[k] + 1;
    }
    out << ',' << row.update_norm << ',' << row.max_member_norm << ','
        << (row.split ? "true" : "false") << '\n';
  }
}

void write_partition_checkpoint(std::ostream& out, const ClusterPartition& partition,
                                const ShapeSpec& shape) {
  out << "fogpop-cfl 1\nfaps " << partition.theta.size() << "\nclusters "
      << partition.clusters.size() << '\n';
  for (const auto& c : partition.clusters) {
    out << "cluster " << c.id;
    for (const auto m : c.members) out << ' ' << m + 1;
    out << '\n';
  }
  for (std::size_t m = 0; m < partition.theta.size(); ++m) {
    out << "model " << m + 1 << '\n';
    write_checkpoint(out, unflatten(partition.theta[m], shape));
  }
}

ClusterPartition read_partition_checkpoint(std::istream& in) {
  std::string line;
  const auto next_line = [&] {
    if (!std::getline(in, line)) throw ValidationError("partition checkpoint truncated");
  };
  next_line();
  if (line != "fogpop-cfl 1") throw ValidationError("unsupported partition checkpoint header");
  std::size_t faps = 0;
  std::size_t clusters = 0;
  next_line();
  if (std::sscanf(line.c_str(), "faps %zu", &faps) != 1) throw ValidationError("expected faps");
  next_line();
  if (std::sscanf(line.c_str(), "clusters %zu", &clusters) != 1) {
    throw ValidationError("expected clusters");
  }
  ClusterPartition p;
  for (std::size_t g = 0; g < clusters; ++g) {
    next_line();
    std::istringstream ss(line);
    std::string key;
    Cluster c;
    ss >> key >> c.id;
    if (key != "cluster") throw ValidationError("expected cluster line");
    for (std::size_t m; ss >> m;) {
      if (m == 0 || m > faps) throw ValidationError("cluster member out of range");
      c.members.push_back(m - 1);
    }
    p.clusters.push_back(std::move(c));
  }
  for (std::size_t m = 0; m < faps; ++m) {
    next_line();
    if (line != "model " + std::to_string(m + 1)) throw ValidationError("expected model line");
    p.theta.push_back(flatten(read_checkpoint(in)));
  }
  return p;
}

}  // namespace fogpop
