#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fogpop/errors.hpp"
#include "fogpop/experiment.hpp"

using namespace fogpop;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fogpop_test_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  apply_config_text(c,
                    "synthetic=users=90,contents=60,clusters=1,seed=4\n"
                    "faps=3\nhidden=8\nlatent=4\nepochs=1\nmax-rounds=3\nwindows=3\n"
                    "capacities=5,10\nmobile-ratios=0,0.25\n");
  c.out = out.string();
  return c;
}

}  // namespace

TEST(Experiment, SettingsRoundTripThroughText) {
  ExperimentConfig c;
  apply_setting(c, "eps1", "0.125");
  apply_setting(c, "policies", "lfu,dcnn-cfl");
  apply_setting(c, "self-weight", "0.1");
  apply_setting(c, "capacity-scope", "per-fap");
  apply_setting(c, "synthetic", "users=100,contents=70,clusters=3,seed=9");
  const auto text = format_config(c);
  ExperimentConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(format_config(back), text);
  EXPECT_EQ(back.sim.cfl.eps1, 0.125);
  EXPECT_EQ(back.sim.features.self_weight, 0.1);
  EXPECT_EQ(back.policies, (std::vector<Policy>{Policy::lfu, Policy::dcnn_cfl}));
  EXPECT_EQ(back.sim.capacity_scope, CapacityScope::per_fap);
  EXPECT_EQ(back.synthetic.cluster_count, 3u);

  for (const auto& key : setting_keys()) {
    EXPECT_NE(text.find(key + "="), std::string::npos) << key;
  }
}

TEST(Experiment, LaterSettingsOverrideEarlier) {
  ExperimentConfig c;
  EXPECT_EQ(c.faps, 10u);
  apply_config_text(c, "# comment\n\nfaps=4\nseed=7\n");
  EXPECT_EQ(c.faps, 4u);
  apply_setting(c, "faps", "6");  // a flag applied after the file wins
  EXPECT_EQ(c.faps, 6u);
  EXPECT_EQ(c.seed, 7u);
}

TEST(Experiment, RejectsBadSettings) {
  ExperimentConfig c;
  EXPECT_THROW(apply_setting(c, "no-such-key", "1"), ConfigError);
  EXPECT_THROW(apply_setting(c, "faps", "ten"), ConfigError);
  EXPECT_THROW(apply_setting(c, "policies", "lfu,fifo"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "faps 3\n"), ConfigError);
  EXPECT_THROW(parse_synthetic_spec("users"), ConfigError);
  c.mobile_ratios = {1.0};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Experiment, SyntheticSpecRoundTrip) {
  SyntheticSpec s;
  s.user_count = 321;
  s.preference_scale = 1.75;
  s.seed = 99;
  const auto back = parse_synthetic_spec(format_synthetic_spec(s));
  EXPECT_EQ(back.user_count, 321u);
  EXPECT_EQ(back.preference_scale, 1.75);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(parse_synthetic_spec("default").user_count, SyntheticSpec{}.user_count);
}

TEST(Experiment, RunIsReproducibleFromManifest) {
  const auto a = scratch("run_a");
  const auto b = scratch("run_b");
  const auto first = run_experiment(tiny_config(a));
  EXPECT_TRUE(first.all_ok());
  EXPECT_EQ(first.cells.size(), 5u * 2u);
  for (const auto* name : {"results.csv", "manifest.txt", "summary.txt", "fig2.dat", "fig3.dat",
                           "cfl_rounds_ratio-0.csv", "cfl_partition_ratio-0.25.txt"}) {
    EXPECT_TRUE(fs::exists(a / name)) << name;
  }

  ExperimentConfig again;
  apply_config_file(again, a / "manifest.txt");
  again.out = b.string();
  run_experiment(again);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
  EXPECT_EQ(slurp(a / "fig2.dat"), slurp(b / "fig2.dat"));

  const auto csv = slurp(a / "results.csv");
  EXPECT_EQ(csv.rfind("policy,capacity,mobile_ratio,fap,window,hits,requests,hit_rate\n", 0), 0u);
  // header + policies x ratios x capacities x faps x windows
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 5 * 2 * 2 * 3 * 3);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiment, FigureSeriesAggregateByRequests) {
  const std::string csv =
      "policy,capacity,mobile_ratio,fap,window,hits,requests,hit_rate\n"
      "lfu,100,0.25,1,1,1,4,0.250000\n"
      "lfu,100,0.25,2,1,3,4,0.750000\n"
      "lfu,600,0.25,1,1,2,2,1.000000\n"
      "lfu,600,0,1,1,0,0,NA\n"
      "lru,100,0.25,1,1,0,8,0.000000\n";
  std::istringstream a(csv);
  const auto fig2 = capacity_series(a, 0.25);
  EXPECT_EQ(fig2.xs, (std::vector<double>{100, 600}));
  EXPECT_EQ(fig2.policies, (std::vector<std::string>{"lfu", "lru"}));
  std::ostringstream out;
  write_figure(out, fig2, "capacity");
  EXPECT_EQ(out.str(),
            "# capacity lfu lru\n"
            "100 0.500000 0.000000\n"
            "600 1.000000 NaN\n");

  std::istringstream b(csv);
  const auto fig3 = ratio_series(b, 600);
  std::ostringstream out3;
  write_figure(out3, fig3, "mobile_ratio");
  EXPECT_EQ(out3.str(), "# mobile_ratio lfu\n0 NaN\n0.25 1.000000\n");
}

TEST(Experiment, SummarizeHandlesEmptyResults) {
  const auto dir = scratch("summarize");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "results.csv");
    f << "policy,capacity,mobile_ratio,fap,window,hits,requests,hit_rate\n";
  }
  summarize(dir / "results.csv", dir);
  EXPECT_TRUE(fs::exists(dir / "fig2.dat"));
  EXPECT_EQ(slurp(dir / "fig2.dat"), "");
  EXPECT_THROW(summarize(dir / "missing.csv", dir), ConfigError);
  fs::remove_all(dir);
}
