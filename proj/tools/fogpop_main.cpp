#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "fogpop/errors.hpp"
#include "fogpop/experiment.hpp"
#include "fogpop/synthetic.hpp"

namespace {

struct FlagSet {
  std::map<std::string, std::string> values;

  void bind(CLI::App& app, const std::string& key, const std::string& help) {
    app.add_option("--" + key, values[key], help);
  }
};

void add_run_flags(CLI::App& app, FlagSet& flags) {
  flags.bind(app, "dataset", "MovieLens 1M directory (ratings.dat, users.dat, movies.dat)");
  flags.bind(app, "synthetic", "synthetic corpus spec, e.g. users=1000,contents=1000,clusters=2");
  flags.bind(app, "subset-users", "keep the most active N users (MovieLens only)");
  flags.bind(app, "subset-contents", "keep the most requested N contents (MovieLens only)");
  flags.bind(app, "topology", "auto|planted|uniform|genre");
  flags.bind(app, "faps", "number of F-APs M");
  flags.bind(app, "neighbors", "neighbor set size T");
  flags.bind(app, "self-weight", "self-information weight w_N");
  flags.bind(app, "hidden", "hidden layer widths, comma-separated");
  flags.bind(app, "latent", "latent dimension H");
  flags.bind(app, "optimizer", "adam|sgd");
  flags.bind(app, "lr", "initial learning rate");
  flags.bind(app, "decay", "learning-rate decay per epoch");
  flags.bind(app, "epochs", "local epochs per round");
  flags.bind(app, "batch", "mini-batch size");
  flags.bind(app, "negative-ratio", "negatives per positive");
  flags.bind(app, "eps1", "FL stopping coefficient");
  flags.bind(app, "eps2", "clustering coefficient");
  flags.bind(app, "max-rounds", "communication round limit");
  flags.bind(app, "normalize-norms", "divide update norms by sqrt(parameter count)");
  flags.bind(app, "cfl-workers", "threads for local training within a round");
  flags.bind(app, "ftrl-alpha", "FTRL alpha");
  flags.bind(app, "ftrl-beta", "FTRL beta");
  flags.bind(app, "ftrl-l1", "FTRL L1 strength");
  flags.bind(app, "ftrl-l2", "FTRL L2 strength");
  flags.bind(app, "ftrl-passes", "FTRL passes over a mobile user's samples");
  flags.bind(app, "staleness", "NLL threshold for retraining mobile preferences");
  flags.bind(app, "windows", "evaluation windows");
  flags.bind(app, "train-fraction", "per-user chronological training fraction");
  flags.bind(app, "capacity-scope", "per-fap|total");
  flags.bind(app, "integrate-mobile-baselines", "let dcnn-fl and dcnn-lc use mobile popularity");
  flags.bind(app, "policies", "comma-separated: dcnn-cfl,dcnn-fl,dcnn-lc,lfu,lru");
  flags.bind(app, "capacities", "comma-separated cache capacities");
  flags.bind(app, "mobile-ratios", "comma-separated mobile user ratios");
  flags.bind(app, "seed", "root seed");
  flags.bind(app, "out", "output directory");
  flags.bind(app, "jobs", "concurrent sweep cells");
  flags.bind(app, "dump-popularity", "write per-window popularity tables");
  flags.bind(app, "dump-neighbors", "write neighbor sets");
}

fogpop::ExperimentConfig resolve(const std::string& config_file, const FlagSet& flags,
                                 const CLI::App& app) {
  fogpop::ExperimentConfig config;
  if (!config_file.empty()) fogpop::apply_config_file(config, config_file);
  for (const auto& [key, value] : flags.values) {
    if (app.count("--" + key) > 0) fogpop::apply_setting(config, key, value);
  }
  if (app.count("--dataset") > 0 && app.count("--synthetic") > 0) {
    throw fogpop::ConfigError("--dataset and --synthetic are mutually exclusive");
  }
  if (app.count("--synthetic") > 0) config.dataset.clear();
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Popularity-based edge caching simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(FOGPOP_VERSION));
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only log warnings and errors");

  auto* run = app.add_subcommand("run", "run a policy sweep");
  std::string config_file;
  run->add_option("--config", config_file, "key=value config file (flags override it)");
  FlagSet flags;
  add_run_flags(*run, flags);
  bool print_config = false;
  run->add_flag("--print-config", print_config, "print the resolved config and exit");

  auto* sum = app.add_subcommand("summarize", "turn a results CSV into fig2.dat and fig3.dat");
  std::string results_path;
  std::string sum_out;
  double fig2_ratio = 0.25;
  std::size_t fig3_capacity = 600;
  sum->add_option("results", results_path, "results CSV")->required();
  sum->add_option("--out", sum_out, "output directory (default: next to the CSV)");
  sum->add_option("--fig2-ratio", fig2_ratio, "mobile ratio of the capacity series");
  sum->add_option("--fig3-capacity", fig3_capacity, "capacity of the mobile-ratio series");

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus in MovieLens format");
  std::string synth_spec;
  std::string synth_out;
  std::size_t synth_faps = 10;
  synth->add_option("--spec", synth_spec, "synthetic corpus spec");
  synth->add_option("--faps", synth_faps, "number of F-APs of the planted topology");
  synth->add_option("--out", synth_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*run) {
      const auto config = resolve(config_file, flags, *run);
      if (print_config) {
        std::fputs(fogpop::format_config(config).c_str(), stdout);
        return 0;
      }
      const auto outcome = fogpop::run_experiment(config);
      if (!outcome.all_ok()) {
        spdlog::error("some sweep cells failed; see {}/summary.txt", config.out);
        return 3;
      }
      return 0;
    }
    if (*sum) {
      const std::filesystem::path csv = results_path;
      const std::filesystem::path dir = sum_out.empty() ? csv.parent_path() : std::filesystem::path(sum_out);
      fogpop::summarize(csv, dir.empty() ? "." : dir, fig2_ratio, fig3_capacity);
      return 0;
    }
    if (*synth) {
      auto spec = fogpop::parse_synthetic_spec(synth_spec);
      spec.fap_count = synth_faps;
      const auto corpus = fogpop::synthesize_dataset(spec);
      fogpop::write_movielens(corpus.dataset, synth_out);
      spdlog::info("wrote {} requests to {}", corpus.dataset.requests.size(), synth_out);
      return 0;
    }
  } catch (const fogpop::ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
