#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fogpop/cache_sim.hpp"
#include "fogpop/synthetic.hpp"

namespace fogpop {

struct ExperimentConfig {
  std::string dataset;        // MovieLens 1M directory; empty selects the synthetic corpus
  SyntheticSpec synthetic;    // fap_count follows `faps`
  std::size_t subset_users = 0;     // 0 keeps every user
  std::size_t subset_contents = 0;  // 0 keeps every content
  std::string topology = "auto";    // auto | planted | uniform | genre
  std::size_t faps = 10;
  SimConfig sim;
  std::vector<Policy> policies = {Policy::dcnn_cfl, Policy::dcnn_fl, Policy::dcnn_lc,
                                  Policy::lfu, Policy::lru};
  std::vector<std::size_t> capacities = {100, 200, 300, 400, 500, 600};
  std::vector<double> mobile_ratios = {0.25};
  std::uint64_t seed = 1;
  std::string out = "out";
  std::size_t jobs = 1;
  bool dump_popularity = false;
  bool dump_neighbors = false;

  void validate() const;
};

// Flat `key=value` settings; keys match the long CLI flag names.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
// Lines of `key=value`; blank lines and lines starting with '#' are ignored.
void apply_config_text(ExperimentConfig& config, std::string_view text);
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);
// Every setting, in a form apply_config_text reads back to an equal config.
std::string format_config(const ExperimentConfig& config);
std::vector<std::string> setting_keys();

SyntheticSpec parse_synthetic_spec(std::string_view text);
std::string format_synthetic_spec(const SyntheticSpec& spec);

// Loads or synthesizes the corpus. For the synthetic corpus the planted
// topology (all users local) is returned as well.
struct Corpus {
  Dataset dataset;
  std::optional<Topology> planted;
  bool synthetic = false;
};

Corpus load_corpus(const ExperimentConfig& config);

Topology make_topology(const Corpus& corpus, const ExperimentConfig& config, double mobile_ratio);

struct CellOutcome {
  Policy policy = Policy::lfu;
  double mobile_ratio = 0.0;
  bool ok = false;
  std::string error;
  PolicyRun run;
  std::string popularity_csv;  // filled when dump_popularity is set
};

struct ExperimentOutcome {
  std::vector<CellOutcome> cells;  // policy-major, then mobile ratio
  std::vector<std::pair<double, std::string>> neighbor_csv;  // per mobile ratio, if requested
  bool all_ok() const;
};

// Runs the full sweep and writes results.csv, summary.txt and manifest.txt
// (plus figure data) under config.out. A failing cell is reported and skipped.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

// Same sweep without touching the file system.
ExperimentOutcome run_sweep(const ExperimentConfig& config, const Corpus& corpus);

void write_results(std::ostream& out, const ExperimentOutcome& outcome);

struct FigureData {
  std::vector<std::string> policies;  // first-appearance order
  std::vector<double> xs;             // ascending
  std::map<std::pair<std::string, double>, std::pair<std::size_t, std::size_t>> cells;

  bool empty() const { return xs.empty(); }
};

// Request-weighted aggregation of results rows: capacity series at a fixed
// mobile ratio, and mobile-ratio series at a fixed capacity.
FigureData capacity_series(std::istream& results_csv, double mobile_ratio);
FigureData ratio_series(std::istream& results_csv, std::size_t capacity);

// Whitespace-separated columns `x policy1 policy2 ...`; NaN marks no requests.
void write_figure(std::ostream& out, const FigureData& data, std::string_view x_label);

// Writes fig2.dat (mobile ratio 0.25) and fig3.dat (capacity 600) next to the results.
void summarize(const std::filesystem::path& results_csv, const std::filesystem::path& out_dir,
               double fig2_ratio = 0.25, std::size_t fig3_capacity = 600);

}  // namespace fogpop
