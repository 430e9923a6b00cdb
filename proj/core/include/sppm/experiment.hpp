#pragma once

#include "sppm/algorithms.hpp"
#include "sppm/cost_model.hpp"
#include "sppm/data_ingest.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sppm {

inline constexpr int kConfigSchemaVersion = 1;

struct SyntheticQuadraticSource {
  int n = 8;
  int d = 5;
  std::uint64_t seed = 0;
  double spread = 1.0;
};

struct LibsvmSource {
  std::filesystem::path path;
  int clusters = 10;
  int clients_per_cluster = 10;
  std::uint64_t seed = 0;
  bool scale_max_abs = false;
  double mu = 0.1;
};

using DatasetSource = std::variant<SyntheticQuadraticSource, LibsvmSource>;

struct SweepGrid {
  std::vector<double> gammas;
  std::vector<int> ks;
  int n_seeds = 5;
  long t_max = 500;
  std::vector<double> localgd_alphas;  // 0 means the default stepsize
  std::vector<int> localgd_steps;
  nlohmann::json localgd_sampling;     // defaults to the run's sampling
};

struct ExperimentConfig {
  nlohmann::json raw;  // as read; echoed into every sidecar
  DatasetSource dataset;
  RunConfig run;       // sampling resolved by build_problem
  nlohmann::json sampling;
  CostParams cost;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  std::optional<SweepGrid> sweep;
};

/// Validates against schema version 1. Relative paths resolve against
/// `base_dir`. FEDPROX_SIM_SEED, when set, replaces the seed list.
ExperimentConfig parse_config(const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct Problem {
  ObjectiveSet clients;
  Vector xstar;
  double xstar_grad_norm = 0.0;
  std::optional<FederatedDataset> data;
  SchemeContext context;
};

Problem build_problem(const ExperimentConfig& cfg);
SamplingScheme resolve_sampling(const nlohmann::json& j, const Problem& problem);

struct RunManifest {
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<std::filesystem::path> artifacts;
  std::string software_version;
  double wall_clock_seconds = 0.0;
  nlohmann::json to_json() const;
};

/// One run per seed: trajectory_seed<S>.csv plus a run_seed<S>.json sidecar,
/// then manifest.json. `jobs` bounds concurrent seeds.
RunManifest run_experiment(const ExperimentConfig& cfg, int jobs = 1);

/// sweep.csv, localgd.csv, sweep.dat, summary.json, manifest.json.
RunManifest sweep_experiment(const ExperimentConfig& cfg, int jobs = 1);

/// Git blob id (SHA-1 of "blob <len>\0<bytes>") of the canonical dump.
std::string content_hash(const std::string& bytes);
std::string config_hash(const nlohmann::json& j);

/// %.17g
std::string format_real(double v);

const char* software_version();

}  // namespace sppm
