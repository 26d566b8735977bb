#include "fogpop/cache_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "fogpop/errors.hpp"
#include "fogpop/rng.hpp"

namespace fogpop {

std::optional<double> HitCount::rate() const {
  if (requests == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(requests);
}

HitCount count_hits(std::span<const std::uint8_t> psi, std::span<const std::size_t> requests) {
  HitCount c;
  c.requests = requests.size();
  for (const auto i : requests) {
    if (i >= psi.size()) throw ValidationError("request outside the library");
    c.hits += psi[i];
  }
  return c;
}

std::optional<double> hit_rate(const CacheDecision& cache, std::span<const std::size_t> requests) {
  return count_hits(cache.psi, requests).rate();
}

std::vector<Associations> simulate_mobility(const Topology& topology, std::size_t window_count,
                                            std::uint64_t seed) {
  if (topology.fap_count == 0) throw ConfigError("topology has no F-APs");
  std::vector<Associations> out(window_count, Associations(topology.fap_count));
  for (std::size_t w = 0; w < window_count; ++w) {
    Rng rng(derive_seed(seed, "mobility", w));
    for (const auto u : topology.mobile_users) {
      out[w][rng.index(topology.fap_count)].push_back(u);
    }
  }
  return out;
}

std::vector<EvalWindow> build_windows(std::span<const RequestRecord> test, const Library& library,
                                      const Topology& topology, std::size_t window_count) {
  if (window_count == 0) throw ConfigError("at least one evaluation window is required");
  if (topology.associations.size() != window_count) {
    throw ValidationError("topology lacks associations for every window");
  }
  const std::size_t M = topology.fap_count;
  std::unordered_map<std::uint32_t, std::size_t> home;
  for (std::size_t m = 0; m < M; ++m) {
    for (const auto u : topology.local_users[m]) home.emplace(raw(u), m);
  }
  std::vector<std::unordered_map<std::uint32_t, std::size_t>> visit(window_count);
  for (std::size_t w = 0; w < window_count; ++w) {
    for (std::size_t m = 0; m < M; ++m) {
      for (const auto u : topology.associations[w][m]) visit[w].emplace(raw(u), m);
    }
  }

  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return test[a].timestamp < test[b].timestamp;
  });

  std::vector<EvalWindow> windows(window_count);
  for (std::size_t w = 0; w < window_count; ++w) {
    windows[w].index = w;
    windows[w].requests.resize(M);
    windows[w].timestamps.resize(M);
    windows[w].mobile_requests.resize(topology.mobile_users.size());
  }
  const auto& mobiles = topology.mobile_users;
  for (std::size_t p = 0; p < order.size(); ++p) {
    const auto& r = test[order[p]];
    const std::size_t w = p * window_count / order.size();
    std::size_t fap;
    if (const auto it = home.find(raw(r.user)); it != home.end()) {
      fap = it->second;
    } else if (const auto jt = visit[w].find(raw(r.user)); jt != visit[w].end()) {
      fap = jt->second;
      const auto k = static_cast<std::size_t>(
          std::lower_bound(mobiles.begin(), mobiles.end(), r.user) - mobiles.begin());
      windows[w].mobile_requests[k].push_back(r);
    } else {
      throw ValidationError("test request from a user outside the topology");
    }
    windows[w].requests[fap].push_back(library.index(r.content));
    windows[w].timestamps[fap].push_back(r.timestamp);
  }
  return windows;
}

void RequestHistory::record(std::size_t content, std::int64_t timestamp) {
  ++counts_.at(content);
  last_[content] = std::max(last_[content], timestamp);
}

CacheDecision lfu_policy(const RequestHistory& history, std::size_t capacity) {
  const auto counts = history.counts();
  std::vector<double> scores(counts.begin(), counts.end());
  return select_cache(scores, capacity);
}

CacheDecision lru_policy(const RequestHistory& history, std::size_t capacity) {
  const auto last = history.last_seen();
  std::vector<double> scores(last.size());
  for (std::size_t i = 0; i < last.size(); ++i) {
    scores[i] = last[i] == RequestHistory::kNever ? -HUGE_VAL : static_cast<double>(last[i]);
  }
  return select_cache(scores, capacity);
}

Policy parse_policy(std::string_view name) {
  if (name == "dcnn-cfl") return Policy::dcnn_cfl;
  if (name == "dcnn-fl") return Policy::dcnn_fl;
  if (name == "dcnn-lc") return Policy::dcnn_lc;
  if (name == "lfu") return Policy::lfu;
  if (name == "lru") return Policy::lru;
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

std::string to_string(Policy policy) {
  switch (policy) {
    case Policy::dcnn_cfl: return "dcnn-cfl";
    case Policy::dcnn_fl: return "dcnn-fl";
    case Policy::dcnn_lc: return "dcnn-lc";
    case Policy::lfu: return "lfu";
    case Policy::lru: return "lru";
  }
  return "?";
}

CapacityScope parse_capacity_scope(std::string_view name) {
  if (name == "per-fap") return CapacityScope::per_fap;
  if (name == "total") return CapacityScope::total;
  throw ConfigError("unknown capacity scope '" + std::string(name) + "'");
}

std::string to_string(CapacityScope scope) {
  return scope == CapacityScope::per_fap ? "per-fap" : "total";
}

std::size_t fap_capacity(std::size_t capacity, CapacityScope scope, std::size_t fap,
                         std::size_t fap_count) {
  if (scope == CapacityScope::per_fap) return capacity;
  return capacity / fap_count + (fap < capacity % fap_count ? 1 : 0);
}

void SimConfig::validate() const {
  if (window_count == 0) throw ConfigError("window count must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  if (!(features.self_weight >= 0.0 && features.self_weight <= 1.0)) {
    throw ConfigError("self weight must lie in [0, 1]");
  }
  if (!(staleness_threshold >= 0.0)) throw ConfigError("staleness threshold must be >= 0");
  train.validate();
  cfl.validate();
  ftrl.validate();
}

Scenario build_scenario(const Dataset& dataset, const Topology& topology, double mobile_ratio,
                        const SimConfig& config, std::uint64_t seed) {
  config.validate();
  topology.validate(dataset);
  Scenario s;
  s.config = config;
  s.seed = seed;
  s.mobile_ratio = mobile_ratio;
  s.library = Library(dataset);
  s.topology = topology;
  const std::size_t M = topology.fap_count;
  const std::size_t W = config.window_count;
  s.topology.associations = simulate_mobility(topology, W, seed);

  const auto split = split_train_test(dataset, config.train_fraction);
  s.test_request_count = split.test.requests.size();
  s.windows = build_windows(split.test.requests, s.library, s.topology, W);

  s.shape = make_shape(kUserInfoDim, s.library.dim(), config.hidden, config.latent);
  s.scopes.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    s.scopes.emplace_back(split.train.requests, s.topology.local_users[m], s.library);
    const auto& scope = s.scopes.back();
    s.features.push_back(build_fap_features(scope, dataset, s.library, config.features));
    s.training.push_back(build_training_set(scope, s.features.back(), config.train.negative_ratio,
                                            derive_seed(seed, "sampling", m)));
    s.activity.push_back(activity_levels(scope));
    s.warm_history.emplace_back(s.library.size());
  }
  for (const auto& r : split.train.requests) {
    if (const auto m = s.topology.home_of(r.user)) {
      s.warm_history[*m].record(s.library.index(r.content), r.timestamp);
    }
  }

  // Each mobile user learns its preference on-device from its own history and
  // only reports predicted request probabilities to the F-AP it visits.
  const auto& mobiles = s.topology.mobile_users;
  std::vector<std::vector<std::size_t>> own(mobiles.size());
  for (const auto& r : split.train.requests) {
    const auto it = std::lower_bound(mobiles.begin(), mobiles.end(), r.user);
    if (it != mobiles.end() && *it == r.user) {
      own[static_cast<std::size_t>(it - mobiles.begin())].push_back(s.library.index(r.content));
    }
  }
  std::vector<PreferenceVector> preference(mobiles.size());
  for (std::size_t k = 0; k < mobiles.size(); ++k) {
    const auto uid = raw(mobiles[k]);
    const auto samples = build_mobile_samples(own[k], s.library, config.train.negative_ratio,
                                              derive_seed(seed, "mobile-samples", uid));
    preference[k] = samples.empty()
                        ? PreferenceVector(s.library.dim(), 0.0)
                        : train_preference(samples, config.ftrl, derive_seed(seed, "ftrl", uid));
  }

  s.mobile.assign(M, std::vector<MobilePopularity>(W));
  s.mobile_counts.assign(M, std::vector<std::size_t>(W, 0));
  for (std::size_t w = 0; w < W; ++w) {
    if (w > 0) {
      for (std::size_t k = 0; k < mobiles.size(); ++k) {
        const auto& recent = s.windows[w - 1].mobile_requests[k];
        if (recent.empty()) continue;
        std::vector<std::size_t> idx;
        for (const auto& r : recent) idx.push_back(s.library.index(r.content));
        const auto uid = raw(mobiles[k]);
        const auto samples = build_mobile_samples(idx, s.library, config.train.negative_ratio,
                                                  derive_seed(seed, "mobile-recent", uid, w));
        preference[k] = retrain_if_stale(preference[k], samples, config.staleness_threshold,
                                         config.ftrl, derive_seed(seed, "ftrl-retrain", uid, w));
      }
    }
    std::vector<std::vector<MobileReport>> reports(M);
    std::size_t k = 0;
    for (std::size_t m = 0; m < M; ++m) {
      for (const auto u : s.topology.associations[w][m]) {
        k = static_cast<std::size_t>(std::lower_bound(mobiles.begin(), mobiles.end(), u) -
                                     mobiles.begin());
        reports[m].push_back(make_report(m, w, u, preference[k], s.library));
      }
      s.mobile[m][w] = mobile_popularity(reports[m], s.library.size());
      s.mobile_counts[m][w] = reports[m].size();
    }
  }
  return s;
}

HitCount PolicyResult::total() const {
  HitCount t;
  for (const auto& row : cells) {
    for (const auto& c : row) t += c;
  }
  return t;
}

std::optional<double> PolicyResult::aggregate() const { return total().rate(); }

std::optional<double> PolicyResult::mean_over_faps() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : cells) {
    HitCount t;
    for (const auto& c : row) t += c;
    if (const auto r = t.rate()) {
      sum += *r;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<std::vector<double>> train_policy_models(const Scenario& scenario, Policy policy,
                                                     TrainingSummary& summary) {
  if (!is_dcnn(policy)) throw ConfigError("policy " + to_string(policy) + " has no model");
  const auto& cfg = scenario.config;
  const std::size_t M = scenario.fap_count();
  const auto init = init_model(scenario.shape.user_layers.front(),
                               scenario.shape.item_layers.front(), cfg.hidden, cfg.latent,
                               scenario.seed);
  const auto theta_init = flatten(init);
  std::vector<std::size_t> counts(M);
  for (std::size_t m = 0; m < M; ++m) counts[m] = scenario.training[m].size();

  const LocalTrainer trainer = [&](std::size_t fap, std::span<const double> theta,
                                   std::size_t round) {
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(scenario.seed, "train", fap);
    const auto model = unflatten(theta, scenario.shape);
    return local_train(model, scenario.training[fap], tc, round * tc.epochs).delta;
  };

  std::vector<std::vector<double>> thetas(M);
  switch (policy) {
    case Policy::dcnn_cfl: {
      auto r = run_cfl(M, counts, theta_init, trainer, cfg.cfl);
      summary.rounds = r.rounds;
      summary.reason = r.reason;
      summary.clusters = r.partition.groups();
      summary.log = std::move(r.log);
      thetas = r.partition.theta;
      summary.partition = std::move(r.partition);
      break;
    }
    case Policy::dcnn_fl: {
      std::vector<std::size_t> all(M);
      std::iota(all.begin(), all.end(), std::size_t{0});
      auto r = run_fl(all, counts, theta_init, trainer, cfg.cfl);
      summary.rounds = r.rounds;
      summary.reason = r.reason;
      summary.clusters = {all};
      thetas.assign(M, r.theta);
      break;
    }
    default: {
      summary.reason = StopReason::converged;
      for (std::size_t m = 0; m < M; ++m) {
        const std::size_t member[] = {m};
        auto r = run_fl(member, counts, theta_init, trainer, cfg.cfl);
        summary.rounds = std::max(summary.rounds, r.rounds);
        if (r.reason == StopReason::max_rounds) summary.reason = StopReason::max_rounds;
        summary.clusters.push_back({m});
        thetas[m] = std::move(r.theta);
      }
      break;
    }
  }
  if (summary.reason == StopReason::max_rounds) {
    spdlog::warn("{} training stopped at the round limit ({} rounds)", to_string(policy),
                 summary.rounds);
  }
  return thetas;
}

PolicyRun run_policy(const Scenario& scenario, Policy policy,
                     std::span<const std::size_t> capacities,
                     const PopularityObserver& observer) {
  const std::size_t M = scenario.fap_count();
  const std::size_t W = scenario.windows.size();
  PolicyRun run;
  for (const auto c : capacities) {
    PolicyResult r;
    r.policy = policy;
    r.capacity = c;
    r.mobile_ratio = scenario.mobile_ratio;
    r.cells.assign(M, std::vector<HitCount>(W));
    run.results.push_back(std::move(r));
  }
  const auto scope = scenario.config.capacity_scope;

  if (!is_dcnn(policy)) {
    for (std::size_t m = 0; m < M; ++m) {
      RequestHistory history = scenario.warm_history[m];
      for (std::size_t w = 0; w < W; ++w) {
        const auto& reqs = scenario.windows[w].requests[m];
        for (auto& r : run.results) {
          const auto cap = fap_capacity(r.capacity, scope, m, M);
          const auto cache = policy == Policy::lfu ? lfu_policy(history, cap)
                                                   : lru_policy(history, cap);
          r.cells[m][w] = count_hits(cache.psi, reqs);
        }
        const auto& ts = scenario.windows[w].timestamps[m];
        for (std::size_t k = 0; k < reqs.size(); ++k) history.record(reqs[k], ts[k]);
      }
    }
    return run;
  }

  const auto thetas = train_policy_models(scenario, policy, run.training);
  const bool use_mobile =
      policy == Policy::dcnn_cfl || scenario.config.integrate_mobile_for_baselines;
  const MobilePopularity none{std::vector<double>(scenario.library.size(), 0.0), false};
  for (std::size_t m = 0; m < M; ++m) {
    const auto model = unflatten(thetas[m], scenario.shape);
    const auto local = local_popularity(model, scenario.features[m], scenario.activity[m]);
    const std::size_t local_count = scenario.topology.local_users[m].size();
    for (std::size_t w = 0; w < W; ++w) {
      const auto table = build_popularity_table(
          m, w, local, use_mobile ? scenario.mobile[m][w] : none,
          use_mobile ? scenario.mobile_counts[m][w] : 0, local_count);
      for (auto& r : run.results) {
        const auto cache = select_cache(table.integrated, fap_capacity(r.capacity, scope, m, M));
        r.cells[m][w] = count_hits(cache.psi, scenario.windows[w].requests[m]);
        if (observer) observer(table, r.capacity, cache);
      }
    }
  }
  return run;
}

void write_results_header(std::ostream& out) {
  out << "policy,capacity,mobile_ratio,fap,window,hits,requests,hit_rate\n";
}

void write_results_rows(std::ostream& out, const PolicyResult& result) {
  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%g", result.mobile_ratio);
  const auto name = to_string(result.policy);
  for (std::size_t m = 0; m < result.cells.size(); ++m) {
    for (std::size_t w = 0; w < result.cells[m].size(); ++w) {
      const auto& c = result.cells[m][w];
      out << name << ',' << result.capacity << ',' << ratio << ',' << m + 1 << ',' << w + 1 << ','
          << c.hits << ',' << c.requests << ',';
      if (const auto rate = c.rate()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *rate);
        out << buf;
      } else {
        out << "NA";
      }
      out << '\n';
    }
  }
}

}  // namespace fogpop
