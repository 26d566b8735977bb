#include "fogpop/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "fogpop/errors.hpp"

#ifndef FOGPOP_VERSION
#define FOGPOP_VERSION "unknown"
#endif

namespace fogpop {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  const std::string s(trim(v));
  char* end = nullptr;
  errno = 0;
  const auto x = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s.front() == '-' || *end != '\0' || errno != 0) {
    throw ConfigError("setting '" + std::string(key) + "' expects a non-negative integer, got '" +
                      s + "'");
  }
  return x;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(trim(v));
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || !std::isfinite(x)) {
    throw ConfigError("setting '" + std::string(key) + "' expects a number, got '" + s + "'");
  }
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  const auto s = trim(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("setting '" + std::string(key) + "' expects true or false");
}

// Shortest decimal that reads back to the same double.
// Shortest text that reads back to the same double.
std::string fmt(double x) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string join(const std::vector<T>& xs, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ',';
    out += f(xs[k]);
  }
  return out;
}

std::vector<std::size_t> to_uint_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (const auto part : split(v, ',')) out.push_back(to_uint(key, part));
  return out;
}

struct Setting {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Setting>& settings() {
  using C = ExperimentConfig;
  using V = std::string_view;
  static const std::vector<Setting> table = {
      {"dataset", [](C& c, V v) { c.dataset = std::string(trim(v)); },
       [](const C& c) { return c.dataset; }},
      {"synthetic", [](C& c, V v) { c.synthetic = parse_synthetic_spec(v); },
       [](const C& c) { return format_synthetic_spec(c.synthetic); }},
      {"subset-users", [](C& c, V v) { c.subset_users = to_uint("subset-users", v); },
       [](const C& c) { return std::to_string(c.subset_users); }},
      {"subset-contents", [](C& c, V v) { c.subset_contents = to_uint("subset-contents", v); },
       [](const C& c) { return std::to_string(c.subset_contents); }},
      {"topology", [](C& c, V v) { c.topology = std::string(trim(v)); },
       [](const C& c) { return c.topology; }},
      {"faps", [](C& c, V v) { c.faps = to_uint("faps", v); },
       [](const C& c) { return std::to_string(c.faps); }},
      {"neighbors", [](C& c, V v) { c.sim.features.neighbors = to_uint("neighbors", v); },
       [](const C& c) { return std::to_string(c.sim.features.neighbors); }},
      {"self-weight", [](C& c, V v) { c.sim.features.self_weight = to_double("self-weight", v); },
       [](const C& c) { return fmt(c.sim.features.self_weight); }},
      {"hidden", [](C& c, V v) { c.sim.hidden = to_uint_list("hidden", v); },
       [](const C& c) {
         return join<std::size_t>(c.sim.hidden, [](const std::size_t& x) { return std::to_string(x); });
       }},
      {"latent", [](C& c, V v) { c.sim.latent = to_uint("latent", v); },
       [](const C& c) { return std::to_string(c.sim.latent); }},
      {"optimizer",
       [](C& c, V v) {
         const auto s = trim(v);
         if (s == "adam") {
           c.sim.train.optimizer = Optimizer::adam;
         } else if (s == "sgd") {
           c.sim.train.optimizer = Optimizer::sgd;
         } else {
           throw ConfigError("optimizer must be adam or sgd");
         }
       },
       [](const C& c) { return std::string(c.sim.train.optimizer == Optimizer::adam ? "adam" : "sgd"); }},
      {"lr", [](C& c, V v) { c.sim.train.learning_rate = to_double("lr", v); },
       [](const C& c) { return fmt(c.sim.train.learning_rate); }},
      {"decay", [](C& c, V v) { c.sim.train.decay = to_double("decay", v); },
       [](const C& c) { return fmt(c.sim.train.decay); }},
      {"epochs", [](C& c, V v) { c.sim.train.epochs = to_uint("epochs", v); },
       [](const C& c) { return std::to_string(c.sim.train.epochs); }},
      {"batch", [](C& c, V v) { c.sim.train.batch_size = to_uint("batch", v); },
       [](const C& c) { return std::to_string(c.sim.train.batch_size); }},
      {"negative-ratio", [](C& c, V v) { c.sim.train.negative_ratio = to_uint("negative-ratio", v); },
       [](const C& c) { return std::to_string(c.sim.train.negative_ratio); }},
      {"eps1", [](C& c, V v) { c.sim.cfl.eps1 = to_double("eps1", v); },
       [](const C& c) { return fmt(c.sim.cfl.eps1); }},
      {"eps2", [](C& c, V v) { c.sim.cfl.eps2 = to_double("eps2", v); },
       [](const C& c) { return fmt(c.sim.cfl.eps2); }},
      {"max-rounds", [](C& c, V v) { c.sim.cfl.max_rounds = to_uint("max-rounds", v); },
       [](const C& c) { return std::to_string(c.sim.cfl.max_rounds); }},
      {"normalize-norms", [](C& c, V v) { c.sim.cfl.normalize_norms = to_bool("normalize-norms", v); },
       [](const C& c) { return std::string(c.sim.cfl.normalize_norms ? "true" : "false"); }},
      {"cfl-workers", [](C& c, V v) { c.sim.cfl.workers = to_uint("cfl-workers", v); },
       [](const C& c) { return std::to_string(c.sim.cfl.workers); }},
      {"ftrl-alpha", [](C& c, V v) { c.sim.ftrl.alpha = to_double("ftrl-alpha", v); },
       [](const C& c) { return fmt(c.sim.ftrl.alpha); }},
      {"ftrl-beta", [](C& c, V v) { c.sim.ftrl.beta = to_double("ftrl-beta", v); },
       [](const C& c) { return fmt(c.sim.ftrl.beta); }},
      {"ftrl-l1", [](C& c, V v) { c.sim.ftrl.l1 = to_double("ftrl-l1", v); },
       [](const C& c) { return fmt(c.sim.ftrl.l1); }},
      {"ftrl-l2", [](C& c, V v) { c.sim.ftrl.l2 = to_double("ftrl-l2", v); },
       [](const C& c) { return fmt(c.sim.ftrl.l2); }},
      {"ftrl-passes", [](C& c, V v) { c.sim.ftrl.passes = to_uint("ftrl-passes", v); },
       [](const C& c) { return std::to_string(c.sim.ftrl.passes); }},
      {"staleness", [](C& c, V v) { c.sim.staleness_threshold = to_double("staleness", v); },
       [](const C& c) { return fmt(c.sim.staleness_threshold); }},
      {"windows", [](C& c, V v) { c.sim.window_count = to_uint("windows", v); },
       [](const C& c) { return std::to_string(c.sim.window_count); }},
      {"train-fraction", [](C& c, V v) { c.sim.train_fraction = to_double("train-fraction", v); },
       [](const C& c) { return fmt(c.sim.train_fraction); }},
      {"capacity-scope", [](C& c, V v) { c.sim.capacity_scope = parse_capacity_scope(trim(v)); },
       [](const C& c) { return to_string(c.sim.capacity_scope); }},
      {"integrate-mobile-baselines",
       [](C& c, V v) { c.sim.integrate_mobile_for_baselines = to_bool("integrate-mobile-baselines", v); },
       [](const C& c) { return std::string(c.sim.integrate_mobile_for_baselines ? "true" : "false"); }},
      {"policies",
       [](C& c, V v) {
         c.policies.clear();
         for (const auto p : split(v, ',')) c.policies.push_back(parse_policy(p));
       },
       [](const C& c) {
         return join<Policy>(c.policies, [](const Policy& p) { return to_string(p); });
       }},
      {"capacities", [](C& c, V v) { c.capacities = to_uint_list("capacities", v); },
       [](const C& c) {
         return join<std::size_t>(c.capacities, [](const std::size_t& x) { return std::to_string(x); });
       }},
      {"mobile-ratios",
       [](C& c, V v) {
         c.mobile_ratios.clear();
         for (const auto p : split(v, ',')) c.mobile_ratios.push_back(to_double("mobile-ratios", p));
       },
       [](const C& c) { return join<double>(c.mobile_ratios, [](const double& x) { return fmt(x); }); }},
      {"seed", [](C& c, V v) { c.seed = to_uint("seed", v); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"out", [](C& c, V v) { c.out = std::string(trim(v)); }, [](const C& c) { return c.out; }},
      {"jobs", [](C& c, V v) { c.jobs = to_uint("jobs", v); },
       [](const C& c) { return std::to_string(c.jobs); }},
      {"dump-popularity", [](C& c, V v) { c.dump_popularity = to_bool("dump-popularity", v); },
       [](const C& c) { return std::string(c.dump_popularity ? "true" : "false"); }},
      {"dump-neighbors", [](C& c, V v) { c.dump_neighbors = to_bool("dump-neighbors", v); },
       [](const C& c) { return std::string(c.dump_neighbors ? "true" : "false"); }},
  };
  return table;
}

template <typename Fn>
void run_pool(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) fn(k);
    });
  }
  for (auto& t : pool) t.join();
}

std::string ratio_tag(double r) { return fmt(r); }

}  // namespace

void ExperimentConfig::validate() const {
  if (faps == 0) throw ConfigError("faps must be positive");
  if (policies.empty()) throw ConfigError("no policy selected");
  if (capacities.empty()) throw ConfigError("no capacity selected");
  if (mobile_ratios.empty()) throw ConfigError("no mobile ratio selected");
  for (const double r : mobile_ratios) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("mobile ratios must lie in [0, 1)");
  }
  if (topology != "auto" && topology != "planted" && topology != "uniform" &&
      topology != "genre") {
    throw ConfigError("topology must be auto, planted, uniform or genre");
  }
  if (topology == "planted" && !dataset.empty()) {
    throw ConfigError("the planted topology exists only for the synthetic corpus");
  }
  if (jobs == 0) throw ConfigError("jobs must be positive");
  sim.validate();
}

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const auto& s : settings()) {
    if (s.key == key) {
      s.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown setting '" + std::string(key) + "'");
}

void apply_config_text(ExperimentConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  for (const auto line : split(text, '\n')) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " lacks '='");
    }
    apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(config, buf.str());
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& s : settings()) out += s.key + "=" + s.get(config) + "\n";
  return out;
}

std::vector<std::string> setting_keys() {
  std::vector<std::string> out;
  for (const auto& s : settings()) out.push_back(s.key);
  return out;
}

SyntheticSpec parse_synthetic_spec(std::string_view text) {
  SyntheticSpec spec;
  const auto t = trim(text);
  if (t.empty() || t == "default") return spec;
  for (const auto part : split(t, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw ConfigError("synthetic spec entries are key=value");
    const auto key = trim(part.substr(0, eq));
    const auto v = trim(part.substr(eq + 1));
    if (key == "users") {
      spec.user_count = to_uint(key, v);
    } else if (key == "contents") {
      spec.content_count = to_uint(key, v);
    } else if (key == "clusters") {
      spec.cluster_count = to_uint(key, v);
    } else if (key == "mean-requests") {
      spec.mean_requests = to_double(key, v);
    } else if (key == "min-requests") {
      spec.min_requests = to_uint(key, v);
    } else if (key == "scale") {
      spec.preference_scale = to_double(key, v);
    } else if (key == "spread") {
      spec.user_spread = to_double(key, v);
    } else if (key == "demographic") {
      spec.demographic_effect = to_double(key, v);
    } else if (key == "seed") {
      spec.seed = to_uint(key, v);
    } else {
      throw ConfigError("unknown synthetic spec key '" + std::string(key) + "'");
    }
  }
  return spec;
}

std::string format_synthetic_spec(const SyntheticSpec& spec) {
  return "users=" + std::to_string(spec.user_count) +
         ",contents=" + std::to_string(spec.content_count) +
         ",clusters=" + std::to_string(spec.cluster_count) +
         ",mean-requests=" + fmt(spec.mean_requests) +
         ",min-requests=" + std::to_string(spec.min_requests) +
         ",scale=" + fmt(spec.preference_scale) + ",spread=" + fmt(spec.user_spread) +
         ",demographic=" + fmt(spec.demographic_effect) + ",seed=" + std::to_string(spec.seed);
}

Corpus load_corpus(const ExperimentConfig& config) {
  Corpus c;
  if (config.dataset.empty()) {
    auto spec = config.synthetic;
    spec.fap_count = config.faps;
    auto corpus = synthesize_dataset(spec);
    c.dataset = std::move(corpus.dataset);
    c.planted = std::move(corpus.topology);
    c.synthetic = true;
  } else {
    c.dataset = load_movielens(config.dataset);
  }
  if (config.subset_users || config.subset_contents) {
    if (c.synthetic) throw ConfigError("subsetting applies to MovieLens data only");
    const auto users = config.subset_users ? config.subset_users : c.dataset.users.size();
    const auto contents = config.subset_contents ? config.subset_contents : c.dataset.contents.size();
    c.dataset = subset_top(c.dataset, users, contents);
  }
  spdlog::info("corpus: {} users, {} contents, {} requests{}", c.dataset.users.size(),
               c.dataset.contents.size(), c.dataset.requests.size(),
               c.synthetic ? " (synthetic)" : "");
  return c;
}

Topology make_topology(const Corpus& corpus, const ExperimentConfig& config, double mobile_ratio) {
  std::string mode = config.topology;
  if (mode == "auto") mode = corpus.planted ? "planted" : "genre";
  if (mode == "planted") {
    if (!corpus.planted) throw ConfigError("corpus has no planted topology");
    return designate_mobiles(*corpus.planted, mobile_ratio, config.seed);
  }
  return build_topology(corpus.dataset, config.faps, mobile_ratio, parse_skew_mode(mode),
                        config.seed);
}

bool ExperimentOutcome::all_ok() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellOutcome& c) { return c.ok; });
}

ExperimentOutcome run_sweep(const ExperimentConfig& config, const Corpus& corpus) {
  config.validate();
  const std::size_t P = config.policies.size();
  const std::size_t R = config.mobile_ratios.size();
  ExperimentOutcome outcome;
  outcome.cells.resize(P * R);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t r = 0; r < R; ++r) {
      outcome.cells[p * R + r].policy = config.policies[p];
      outcome.cells[p * R + r].mobile_ratio = config.mobile_ratios[r];
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    const double ratio = config.mobile_ratios[r];
    std::optional<Scenario> scenario;
    try {
      scenario = build_scenario(corpus.dataset, make_topology(corpus, config, ratio), ratio,
                                config.sim, config.seed);
    } catch (const std::exception& e) {
      spdlog::error("mobile ratio {}: scenario failed: {}", ratio_tag(ratio), e.what());
      for (std::size_t p = 0; p < P; ++p) outcome.cells[p * R + r].error = e.what();
      continue;
    }
    if (config.dump_neighbors) {
      std::ostringstream buf;
      buf << "scope,owner,neighbor,similarity\n";
      for (std::size_t m = 0; m < scenario->fap_count(); ++m) {
        write_neighbor_csv(buf, m, scenario->features[m], scenario->library);
      }
      outcome.neighbor_csv.emplace_back(ratio, buf.str());
    }
    run_pool(P, config.jobs, [&](std::size_t p) {
      auto& cell = outcome.cells[p * R + r];
      try {
        std::ostringstream pop;
        PopularityObserver observer;
        if (config.dump_popularity) {
          write_popularity_header(pop);
          const auto cap = config.capacities.back();
          observer = [&](const PopularityTable& t, std::size_t c, const CacheDecision& d) {
            if (c == cap) write_popularity_rows(pop, t, d, scenario->library);
          };
        }
        cell.run = run_policy(*scenario, cell.policy, config.capacities, observer);
        if (config.dump_popularity && is_dcnn(cell.policy)) cell.popularity_csv = pop.str();
        cell.ok = true;
        spdlog::info("{} at mobile ratio {}: done", to_string(cell.policy), ratio_tag(ratio));
      } catch (const std::exception& e) {
        cell.error = e.what();
        spdlog::error("{} at mobile ratio {}: {}", to_string(cell.policy), ratio_tag(ratio),
                      e.what());
      }
    });
  }
  return outcome;
}

void write_results(std::ostream& out, const ExperimentOutcome& outcome) {
  write_results_header(out);
  for (const auto& cell : outcome.cells) {
    if (!cell.ok) continue;
    for (const auto& r : cell.run.results) write_results_rows(out, r);
  }
}

namespace {

void write_summary(std::ostream& out, const ExperimentConfig& config, const Corpus& corpus,
                   const ExperimentOutcome& outcome) {
  out << "fogpop " << FOGPOP_VERSION << "\n";
  out << "corpus: " << (corpus.synthetic ? "synthetic" : config.dataset) << ", "
      << corpus.dataset.users.size() << " users, " << corpus.dataset.contents.size()
      << " contents, " << corpus.dataset.requests.size() << " requests\n";
  out << "M=" << config.faps << " T=" << config.sim.features.neighbors
      << " w_N=" << fmt(config.sim.features.self_weight) << " seed=" << config.seed
      << " capacity-scope=" << to_string(config.sim.capacity_scope) << "\n\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-9s %8s %9s %9s %9s %9s %9s\n", "policy", "ratio",
                "capacity", "hits", "requests", "hit_rate", "fap_mean");
  out << line;
  for (const auto& cell : outcome.cells) {
    if (!cell.ok) {
      out << to_string(cell.policy) << " ratio " << fmt(cell.mobile_ratio)
          << " FAILED: " << cell.error << "\n";
      continue;
    }
    for (const auto& r : cell.run.results) {
      const auto t = r.total();
      const auto agg = r.aggregate();
      const auto fm = r.mean_over_faps();
      std::snprintf(line, sizeof line, "%-9s %8s %9zu %9zu %9zu %9.4f %9.4f\n",
                    to_string(r.policy).c_str(), fmt(r.mobile_ratio).c_str(), r.capacity, t.hits,
                    t.requests, agg ? *agg : NAN, fm ? *fm : NAN);
      out << line;
    }
  }
  out << "\ntraining\n";
  for (const auto& cell : outcome.cells) {
    if (!cell.ok || !is_dcnn(cell.policy)) continue;
    const auto& tr = cell.run.training;
    out << to_string(cell.policy) << " ratio " << fmt(cell.mobile_ratio) << ": " << tr.rounds
        << " rounds (" << to_string(tr.reason) << "), groups";
    for (const auto& g : tr.clusters) {
      out << " {";
      for (std::size_t k = 0; k < g.size(); ++k) out << (k ? "," : "") << g[k] + 1;
      out << "}";
    }
    out << "\n";
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::filesystem::path dir = config.out;
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.txt",
             "# fogpop run manifest\n# version " + std::string(FOGPOP_VERSION) + "\n" +
                 format_config(config));
  const auto corpus = load_corpus(config);
  auto outcome = run_sweep(config, corpus);

  {
    std::ofstream out(dir / "results.csv", std::ios::binary);
    write_results(out, outcome);
  }
  {
    std::ostringstream buf;
    write_summary(buf, config, corpus, outcome);
    write_file(dir / "summary.txt", buf.str());
  }
  for (const auto& cell : outcome.cells) {
    if (!cell.ok) continue;
    const auto tag = ratio_tag(cell.mobile_ratio);
    if (cell.policy == Policy::dcnn_cfl && cell.run.training.partition) {
      std::ostringstream log;
      write_round_log(log, cell.run.training.log);
      write_file(dir / ("cfl_rounds_ratio-" + tag + ".csv"), log.str());
      std::ostringstream ckpt;
      const auto init = init_model(kUserInfoDim, kContentInfoDim, config.sim.hidden,
                                   config.sim.latent, config.seed);
      write_partition_checkpoint(ckpt, *cell.run.training.partition, init.shape());
      write_file(dir / ("cfl_partition_ratio-" + tag + ".txt"), ckpt.str());
    }
    if (!cell.popularity_csv.empty()) {
      write_file(dir / ("popularity_" + to_string(cell.policy) + "_ratio-" + tag + ".csv"),
                 cell.popularity_csv);
    }
  }
  for (const auto& [ratio, text] : outcome.neighbor_csv) {
    write_file(dir / ("neighbors_ratio-" + ratio_tag(ratio) + ".csv"), text);
  }
  summarize(dir / "results.csv", dir);
  return outcome;
}

namespace {

struct ResultRow {
  std::string policy;
  std::size_t capacity;
  double ratio;
  std::size_t hits;
  std::size_t requests;
};

std::vector<ResultRow> read_rows(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (trim(line) != "policy,capacity,mobile_ratio,fap,window,hits,requests,hit_rate") {
    throw ParseError(1, "unexpected results header");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw ParseError(line_no, "results row needs 8 fields");
    try {
      rows.push_back({std::string(f[0]), to_uint("capacity", f[1]), to_double("mobile_ratio", f[2]),
                      to_uint("hits", f[5]), to_uint("requests", f[6])});
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return rows;
}

void add_point(FigureData& d, const std::string& policy, double x, const ResultRow& r) {
  if (std::find(d.policies.begin(), d.policies.end(), policy) == d.policies.end()) {
    d.policies.push_back(policy);
  }
  if (std::find(d.xs.begin(), d.xs.end(), x) == d.xs.end()) {
    d.xs.insert(std::upper_bound(d.xs.begin(), d.xs.end(), x), x);
  }
  auto& c = d.cells[{policy, x}];
  c.first += r.hits;
  c.second += r.requests;
}

}  // namespace

FigureData capacity_series(std::istream& results_csv, double mobile_ratio) {
  FigureData d;
  for (const auto& r : read_rows(results_csv)) {
    if (std::abs(r.ratio - mobile_ratio) > 1e-9) continue;
    add_point(d, r.policy, static_cast<double>(r.capacity), r);
  }
  return d;
}

FigureData ratio_series(std::istream& results_csv, std::size_t capacity) {
  FigureData d;
  for (const auto& r : read_rows(results_csv)) {
    if (r.capacity != capacity) continue;
    add_point(d, r.policy, r.ratio, r);
  }
  return d;
}

void write_figure(std::ostream& out, const FigureData& data, std::string_view x_label) {
  if (data.empty()) return;
  out << "# " << x_label;
  for (const auto& p : data.policies) out << ' ' << p;
  out << '\n';
  for (const double x : data.xs) {
    out << fmt(x);
    for (const auto& p : data.policies) {
      const auto it = data.cells.find({p, x});
      if (it == data.cells.end() || it->second.second == 0) {
        out << " NaN";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.6f",
                      static_cast<double>(it->second.first) /
                          static_cast<double>(it->second.second));
        out << buf;
      }
    }
    out << '\n';
  }
}

void summarize(const std::filesystem::path& results_csv, const std::filesystem::path& out_dir,
               double fig2_ratio, std::size_t fig3_capacity) {
  std::ifstream in(results_csv, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + results_csv.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto text = buf.str();
  std::istringstream a(text), b(text);
  const auto fig2 = capacity_series(a, fig2_ratio);
  const auto fig3 = ratio_series(b, fig3_capacity);
  if (fig2.empty()) spdlog::warn("no rows at mobile ratio {}; fig2.dat is empty", fmt(fig2_ratio));
  if (fig3.empty()) spdlog::warn("no rows at capacity {}; fig3.dat is empty", fig3_capacity);
  std::filesystem::create_directories(out_dir);
  std::ofstream f2(out_dir / "fig2.dat", std::ios::binary);
  write_figure(f2, fig2, "capacity");
  std::ofstream f3(out_dir / "fig3.dat", std::ios::binary);
  write_figure(f3, fig3, "mobile_ratio");
}

}  // namespace fogpop
