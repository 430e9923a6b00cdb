#include "sppm/errors.hpp"
#include "sppm/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace sppm {
namespace {

using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sppm_experiment_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json synthetic_config() {
  return {{"schema_version", 1},
          {"dataset", {{"type", "synthetic_quadratic"}, {"n", 6}, {"d", 3}, {"seed", 4}, {"spread", 1.0}}},
          {"algorithm", {{"kind", "sppm_as"}, {"gamma", 1.0}, {"T", 25}, {"epsilon", 1e-3}}},
          {"sampling", {{"type", "nice"}, {"tau", 2}}},
          {"seeds", {1, 2, 3}}};
}

std::string field_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

TEST(ContentHash, GitBlobIds) {
  EXPECT_EQ(content_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(content_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(config_hash(json{{"a", 1}}), content_hash("{\"a\":1}"));
}

TEST(FormatReal, SeventeenDigits) {
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(format_real(2.0), "2");
}

TEST(ParseConfig, ValidSynthetic) {
  const auto cfg = parse_config(synthetic_config(), "/tmp/base");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(cfg.run.kind, AlgorithmKind::SppmAs);
  EXPECT_EQ(cfg.run.T, 25);
  EXPECT_EQ(cfg.output_dir, fs::path("/tmp/base/out"));
  EXPECT_EQ(cfg.raw, synthetic_config());
}

TEST(ParseConfig, ErrorsNameTheField) {
  auto j = synthetic_config();
  j["colour"] = "red";
  EXPECT_EQ(field_of(j), "colour");
  j = synthetic_config();
  j["algorithm"]["stepsize"] = 1;
  EXPECT_EQ(field_of(j), "algorithm.stepsize");
  j = synthetic_config();
  j.erase("schema_version");
  EXPECT_EQ(field_of(j), "schema_version");
  j = synthetic_config();
  j["schema_version"] = 2;
  EXPECT_EQ(field_of(j), "schema_version");
  j = synthetic_config();
  j["algorithm"]["gamma"] = -1.0;
  EXPECT_EQ(field_of(j), "algorithm.gamma");
  j = synthetic_config();
  j["algorithm"]["kind"] = "fedsgd";
  EXPECT_EQ(field_of(j), "algorithm.kind");
  j = synthetic_config();
  j["sampling"]["tau"] = "two";
  EXPECT_EQ(field_of(j), "sampling.tau");
  j = synthetic_config();
  j["dataset"]["n"] = 0;
  EXPECT_EQ(field_of(j), "dataset.n");
  j = synthetic_config();
  j["seed"] = 3;
  EXPECT_EQ(field_of(j), "seeds");
  j = synthetic_config();
  j["solver"] = {{"solver", "gd"}};
  EXPECT_EQ(field_of(j), "solver");
  j = synthetic_config();
  j["dataset"] = {{"type", "libsvm"}, {"path", "x.libsvm"}};
  EXPECT_EQ(field_of(j), "solver");
  j = synthetic_config();
  j["algorithm"]["kind"] = "fedavg_sppm_as";
  EXPECT_EQ(field_of(j), "algorithm.alpha");
}

TEST(ParseConfig, MissingLibsvmFileIsAConfigError) {
  auto j = synthetic_config();
  j["dataset"] = {{"type", "libsvm"}, {"path", "/nonexistent/data.libsvm"}, {"clusters", 2}, {"clients_per_cluster", 2}};
  j["solver"] = {{"solver", "gd"}, {"K", 2}};
  const auto cfg = parse_config(j);
  try {
    build_problem(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "dataset.path");
  }
}

TEST(ParseConfig, SeedEnvironmentOverride) {
  ::setenv("FEDPROX_SIM_SEED", "77", 1);
  const auto cfg = parse_config(synthetic_config());
  EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{77});
  ::setenv("FEDPROX_SIM_SEED", "7x", 1);
  EXPECT_EQ(field_of(synthetic_config()), "FEDPROX_SIM_SEED");
  ::unsetenv("FEDPROX_SIM_SEED");
  EXPECT_EQ(parse_config(synthetic_config()).seeds.size(), 3u);
}

TEST(RunExperiment, ArtifactsAreDeterministicAndSelfDescribing) {
  const auto dir_a = scratch("a"), dir_b = scratch("b");
  auto j = synthetic_config();
  j["output_dir"] = dir_a.string();
  const auto a = run_experiment(parse_config(j), 1);
  j["output_dir"] = dir_b.string();
  const auto cfg_b = parse_config(j);
  run_experiment(cfg_b, 3);

  ASSERT_EQ(a.artifacts.size(), 6u);
  for (int seed : {1, 2, 3}) {
    const auto name = "trajectory_seed" + std::to_string(seed) + ".csv";
    const auto csv = slurp(dir_a / name);
    EXPECT_EQ(csv, slurp(dir_b / name));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,sq_dist,rounds_local,cum_local,cum_global,certified_b");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 27);

    const auto meta = json::parse(slurp(dir_a / ("run_seed" + std::to_string(seed) + ".json")));
    EXPECT_EQ(meta["seed"], seed);
    EXPECT_EQ(meta["config_hash"], a.config_hash);
    EXPECT_EQ(meta["trajectory_hash"], content_hash(csv));
    EXPECT_EQ(meta["sampling"]["type"], "nice");
    EXPECT_EQ(meta["config"]["dataset"]["n"], 6);
  }
  // Output location is part of the config, so the two hashes differ.
  EXPECT_NE(a.config_hash, config_hash(cfg_b.raw));
  const auto manifest = json::parse(slurp(dir_a / "manifest.json"));
  EXPECT_EQ(manifest["seeds"], json({1, 2, 3}));
  EXPECT_EQ(manifest["config_hash"], a.config_hash);
  EXPECT_EQ(manifest["artifacts"].size(), 6u);
}

TEST(RunExperiment, DimensionMismatchInX0) {
  auto j = synthetic_config();
  j["output_dir"] = scratch("x0").string();
  j["algorithm"]["x0"] = {1.0, 2.0};
  EXPECT_THROW(run_experiment(parse_config(j)), ConfigError);
}

TEST(SweepExperiment, WritesEveryArtifact) {
  const auto dir = scratch("sweep");
  auto j = synthetic_config();
  j["output_dir"] = dir.string();
  j["solver"] = {{"solver", "gd"}, {"K", 1}};
  j["algorithm"]["epsilon"] = 1e-2;
  j["algorithm"]["x0"] = {2.0, 2.0, 2.0};
  j["sweep"] = {{"gammas", {1.0, 10.0}}, {"K", {1, 2}}, {"n_seeds", 3}, {"t_max", 100},
                {"localgd", {{"alphas", {0.0}}, {"local_steps", {2}}}}};
  const auto m = sweep_experiment(parse_config(j));
  for (const char* f : {"sweep.csv", "localgd.csv", "sweep.dat", "summary.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto csv = slurp(dir / "sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "gamma,K,T_eps,total_cost,reached");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  const auto summary = json::parse(slurp(dir / "summary.json"));
  EXPECT_TRUE(summary.contains("per_gamma"));
  EXPECT_TRUE(summary.contains("reduction_vs_localgd_percent_by_model"));
  EXPECT_FALSE(m.config_hash.empty());
}

TEST(SweepExperiment, RequiresSweepBlock) {
  auto j = synthetic_config();
  j["output_dir"] = scratch("nosweep").string();
  EXPECT_THROW(sweep_experiment(parse_config(j)), ConfigError);
}

}  // namespace
}  // namespace sppm
