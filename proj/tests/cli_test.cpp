#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome sim(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + SPPM_SIM_PATH + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return o;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) o.output += buf.data();
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

fs::path write_config(const std::string& name, const nlohmann::json& j) {
  const auto dir = fs::temp_directory_path() / "sppm_cli_test";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << j.dump(2);
  return path;
}

nlohmann::json good_config(const std::string& out) {
  return {{"schema_version", 1},
          {"dataset", {{"type", "synthetic_quadratic"}, {"n", 4}, {"d", 2}, {"seed", 1}}},
          {"algorithm", {{"kind", "sppm_as"}, {"gamma", 1.0}, {"T", 10}}},
          {"sampling", {{"type", "nice"}, {"tau", 2}}},
          {"seed", 5},
          {"output_dir", out}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Cli, RunSucceedsAndEnvironmentSeedWins) {
  const auto out = (fs::temp_directory_path() / "sppm_cli_test" / "run").string();
  fs::remove_all(out);
  const auto path = write_config("good.json", good_config(out));
  const auto r = sim("run --config " + path.string(), "FEDPROX_SIM_SEED=9");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(fs::path(out) / "trajectory_seed9.csv"));
  EXPECT_FALSE(fs::exists(fs::path(out) / "trajectory_seed5.csv"));
  const auto meta = nlohmann::json::parse(slurp(fs::path(out) / "run_seed9.json"));
  EXPECT_EQ(meta["seed"], 9);
}

TEST(Cli, ConfigErrorExitsTwoAndNamesTheField) {
  auto j = good_config("/tmp/unused");
  j["algorithm"]["gamma"] = "big";
  const auto r = sim("run --config " + write_config("bad.json", j).string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("algorithm.gamma"), std::string::npos) << r.output;

  const auto missing = sim("run --config /nonexistent/config.json");
  EXPECT_EQ(missing.code, 2);
  EXPECT_EQ(sim("run").code, 2);
  EXPECT_EQ(sim("verify --level medium").code, 2);
}

TEST(Cli, NumericFailureExitsThree) {
  auto j = good_config((fs::temp_directory_path() / "sppm_cli_test" / "diverge").string());
  j["algorithm"] = {{"kind", "localgd"}, {"alpha", 50.0}, {"T", 200}, {"x0", {1.0, 1.0}}};
  const auto r = sim("run --config " + write_config("diverge.json", j).string());
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("diverged"), std::string::npos);
}

TEST(Cli, VerifyQuick) {
  const auto r = sim("verify --level quick");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("pass"), std::string::npos);
}

}  // namespace
