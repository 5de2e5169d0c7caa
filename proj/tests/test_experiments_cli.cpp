#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfwf/cli.hpp"
#include "mfwf/experiments.hpp"

using namespace mfwf;
namespace fs = std::filesystem;

namespace {

const char* kModel = "[model]\nc = 1\ns = 1\nd = 1\nm = 1\n\n[run]\nseed = 11\n\n";

ExperimentConfig small(const std::string& name, const std::string& body) {
  return load_experiment(Config::from_string(std::string(kModel) + body), name);
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mfwf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mfwf_test_" + name);
  fs::remove_all(p);
  return p;
}

const char* kEmergence =
    "[emergence]\nn_list = 8, 32\nreps = 200\neps = 0.1\ndt = 0.01\nslope_tolerance = 0.5\nbootstrap = 400\n";

}  // namespace

TEST(ExperimentConfig, Validation) {
  EXPECT_THROW(load_experiment(Config::from_string("[model]\nc=1\ns=1\nd=1\n[run]\nseed=1\n[emergence]\nreps=4\n"), "emergence"), ConfigError);
  EXPECT_THROW(small("bogus", ""), ConfigError);
  EXPECT_THROW(small("fixation", "[emergence]\nreps = 4\n"), ConfigError);
  EXPECT_THROW(small("emergence", "[emergence]\nreps = 1\n"), ConfigError);
  EXPECT_THROW(small("emergence", "[emergence]\nreps = 4\nn_list = 8, 2.5\n"), ConfigError);
  ExperimentConfig ok = small("emergence", kEmergence);
  EXPECT_EQ(ok.n_list, (std::vector<int>{8, 32}));
  EXPECT_EQ(ok.seed, 11u);
  EXPECT_THROW(run_experiment(small("emergence", "[emergence]\nreps = 4\nn_list = 8, 32\n")), ConfigError);
}

TEST(Experiment, EmergenceReportAndSeScaling) {
  ExperimentReport a = run_experiment(small("emergence", kEmergence));
  EXPECT_GT(a.estimate("slope").value, 0.0);
  EXPECT_EQ(a.tables.size(), 2u);
  EXPECT_EQ(a.tables[1].rows.size(), 400u);
  EXPECT_TRUE(a.check("slope_positive").passed);

  std::string doubled = kEmergence;
  doubled.replace(doubled.find("reps = 200"), 10, "reps = 800");
  ExperimentReport b = run_experiment(small("emergence", doubled));
  // Four times the replicas: standard error halves. Bootstrap SEs of a median
  // carry relative noise of order n^{-1/4}, hence the wide band.
  double ratio = a.estimate("slope").se / b.estimate("slope").se;
  EXPECT_GT(ratio, 1.3);
  EXPECT_LT(ratio, 3.0);
}

TEST(Experiment, FixationProfileShape) {
  ExperimentReport r = run_experiment(small("fixation",
      "[fixation]\nn_sites = 64\nreps = 40\ndt = 0.01\nt_grid = -2, 0, 3\nlow_level = 0.5\nhigh_level = 0.5\nvariance_sigmas = 2\n"));
  EXPECT_EQ(r.tables[0].rows.size(), 3u);
  EXPECT_LT(r.estimate("mean_left").value, r.estimate("mean_right").value);
  EXPECT_GT(r.estimate("variance_at_0").value, 0.0);
  EXPECT_THROW(run_experiment(small("fixation",
      "[fixation]\nn_sites = 64\nreps = 4\ndt = 0.01\nt_grid = -2, 3\nlow_level = 0.5\nhigh_level = 0.5\nvariance_sigmas = 2\n")), ConfigError);
}

TEST(Experiment, DualProfileRuns) {
  ExperimentReport r = run_experiment(small("dual-profile",
      "[dual_profile]\nn_list = 200, 400\nreps = 20\nt_before = -2\nt_after = 1\nwindow_lo = -3\nwindow_hi = -1\n"
      "relative_tolerance = 0.5\ntv_tolerance = 0.5\n"));
  EXPECT_EQ(r.tables[0].rows.size(), 40u);
  EXPECT_GT(r.estimate("u_standard_at_0").value, 0.0);
  EXPECT_LT(r.estimate("tv_N400").value, 1.0);
  EXPECT_LT(r.estimate("tv_limit_N400").value, r.estimate("tv_N400").value);
}

TEST(Experiment, ReportWritesFiles) {
  ExperimentReport r = run_experiment(small("emergence", kEmergence));
  fs::path dir = scratch("report");
  auto files = r.write(dir);
  ASSERT_EQ(files.size(), 3u);
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f));
  auto j = nlohmann::json::parse(slurp(dir / "emergence_report.json"));
  EXPECT_EQ(j["experiment"], "emergence");
  EXPECT_EQ(j["seed"], 11);
  fs::remove_all(dir);
}

TEST(Cli, MalthusPrintsAlpha) {
  fs::path dir = scratch("malthus");
  ASSERT_EQ(run_cli({"malthus", "--c", "1", "--s", "1", "--d", "1", "--out", dir.string()}), 0);
  std::istringstream in(slurp(dir / "malthus.csv"));
  std::string line;
  double alpha = -1;
  while (std::getline(in, line))
    if (line.rfind("alpha,", 0) == 0) alpha = std::stod(line.substr(6));
  EXPECT_GT(alpha, 0.0);
  EXPECT_LT(alpha, 1.0);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST(Cli, MissingRateFailsWithoutOutput) {
  fs::path dir = scratch("missing");
  EXPECT_NE(run_cli({"simulate-forward", "--c", "1", "--s", "1", "--d", "1", "--N", "4", "--T", "1", "--out", dir.string()}), 0);
  EXPECT_FALSE(fs::exists(dir));
  EXPECT_NE(run_cli({"malthus", "--c", "1", "--s", "1", "--out", dir.string()}), 0);
  EXPECT_FALSE(fs::exists(dir));
  EXPECT_NE(run_cli({"no-such-command"}), 0);
}

TEST(Cli, ConfigFileWithOverride) {
  fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "[model]\nc = 1\ns = 1\nd = 1\nm = 1\nn_sites = 4\n";
  ASSERT_EQ(run_cli({"simulate-forward", "--config", (dir / "run.ini").string(), "--N", "6", "--T", "0.5", "--dt", "0.01", "--out", (dir / "o").string()}), 0);
  auto j = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  EXPECT_EQ(j["params"]["n_sites"], 6);
  fs::remove_all(dir);
}

TEST(Cli, DeterministicAcrossRunsAndWorkers) {
  auto run = [](const char* workers, const std::string& tag) {
    setenv("MFWF_WORKERS", workers, 1);
    fs::path dir = scratch("det_" + tag);
    std::vector<std::string> files;
    EXPECT_EQ(run_cli({"duality-check", "--c", "1", "--s", "1", "--d", "1", "--m", "1", "--N", "3", "--k", "1", "--l", "2", "--t", "0.5",
                       "--reps", "200", "--seed", "5", "--out", (dir / "a").string()}), 0);
    EXPECT_EQ(run_cli({"droplet", "--c", "1", "--s", "1", "--d", "1", "--m", "1", "--T", "1", "--reps", "8", "--snapshot-times", "0.5,1", "--seed", "5", "--out",
                       (dir / "b").string()}), 0);
    std::string all = slurp(dir / "a" / "duality.csv") + slurp(dir / "b" / "droplet_mass.csv") + slurp(dir / "b" / "droplet_atoms.csv");
    fs::remove_all(dir);
    return all;
  };
  std::string one = run("1", "x"), again = run("1", "y"), four = run("4", "z");
  unsetenv("MFWF_WORKERS");
  EXPECT_FALSE(one.empty());
  EXPECT_EQ(one, again);
  EXPECT_EQ(one, four);
}
