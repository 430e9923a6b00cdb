#include "sppm/experiment.hpp"

#include "sppm/errors.hpp"
#include "sppm/theory.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#ifndef SPPM_VERSION
#define SPPM_VERSION "0.0.0"
#endif

namespace sppm {
namespace fs = std::filesystem;

namespace {

using json = nlohmann::json;

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where.empty() ? k : where + "." + k, "unknown field");
}

const json& object_at(const json& j, const std::string& key, const std::string& field) {
  if (!j.contains(key)) throw ConfigError(field, "required");
  if (!j[key].is_object()) throw ConfigError(field, "expected an object");
  return j[key];
}

double number(const json& j, const std::string& key, const std::string& field, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(field, "expected a number");
  return j[key].get<double>();
}

long long integer(const json& j, const std::string& key, const std::string& field,
                  long long fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(field, "expected an integer");
  return j[key].get<long long>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& key, const std::string& field,
                               std::uint64_t fallback) {
  const auto v = integer(j, key, field, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError(field, "must be >= 0");
  return static_cast<std::uint64_t>(v);
}

template <class T>
std::vector<T> array_of(const json& j, const std::string& key, const std::string& field) {
  if (!j.contains(key)) return {};
  try {
    return j[key].get<std::vector<T>>();
  } catch (const json::exception&) {
    throw ConfigError(field, "expected an array");
  }
}

DatasetSource parse_dataset(const json& j, const fs::path& base_dir) {
  if (!j.contains("type") || !j["type"].is_string()) throw ConfigError("dataset.type", "required string");
  const auto type = j["type"].get<std::string>();
  if (type == "synthetic_quadratic") {
    allow_keys(j, "dataset", {"type", "n", "d", "seed", "spread"});
    SyntheticQuadraticSource s;
    s.n = static_cast<int>(integer(j, "n", "dataset.n", s.n));
    s.d = static_cast<int>(integer(j, "d", "dataset.d", s.d));
    s.seed = unsigned_integer(j, "seed", "dataset.seed", 0);
    s.spread = number(j, "spread", "dataset.spread", s.spread);
    if (s.n < 1) throw ConfigError("dataset.n", "must be >= 1");
    if (s.d < 1) throw ConfigError("dataset.d", "must be >= 1");
    if (!(s.spread >= 0.0)) throw ConfigError("dataset.spread", "must be >= 0");
    return s;
  }
  if (type == "libsvm") {
    allow_keys(j, "dataset", {"type", "path", "clusters", "clients_per_cluster", "seed", "scale", "mu"});
    LibsvmSource s;
    if (!j.contains("path") || !j["path"].is_string()) throw ConfigError("dataset.path", "required string");
    s.path = j["path"].get<std::string>();
    if (s.path.is_relative() && !base_dir.empty()) s.path = (base_dir / s.path).lexically_normal();
    s.clusters = static_cast<int>(integer(j, "clusters", "dataset.clusters", s.clusters));
    s.clients_per_cluster =
        static_cast<int>(integer(j, "clients_per_cluster", "dataset.clients_per_cluster", s.clients_per_cluster));
    s.seed = unsigned_integer(j, "seed", "dataset.seed", 0);
    s.mu = number(j, "mu", "dataset.mu", s.mu);
    if (j.contains("scale")) {
      if (!j["scale"].is_string()) throw ConfigError("dataset.scale", "expected \"none\" or \"max_abs\"");
      const auto scale = j["scale"].get<std::string>();
      if (scale == "max_abs") s.scale_max_abs = true;
      else if (scale != "none") throw ConfigError("dataset.scale", "expected \"none\" or \"max_abs\"");
    }
    if (s.clusters < 1) throw ConfigError("dataset.clusters", "must be >= 1");
    if (s.clients_per_cluster < 1) throw ConfigError("dataset.clients_per_cluster", "must be >= 1");
    if (!(s.mu > 0.0)) throw ConfigError("dataset.mu", "must be > 0");
    return s;
  }
  throw ConfigError("dataset.type", "unknown dataset type '" + type + "'");
}

RunConfig parse_run(const json& j) {
  allow_keys(j, "algorithm", {"kind", "gamma", "alpha", "local_rounds", "local_steps", "T", "epsilon", "x0"});
  RunConfig r;
  if (!j.contains("kind") || !j["kind"].is_string()) throw ConfigError("algorithm.kind", "required string");
  try {
    r.kind = algorithm_from_string(j["kind"].get<std::string>());
  } catch (const ArgumentError& e) {
    throw ConfigError("algorithm.kind", e.what());
  }
  r.gamma = number(j, "gamma", "algorithm.gamma", r.gamma);
  r.alpha = number(j, "alpha", "algorithm.alpha", r.alpha);
  r.local_rounds = static_cast<int>(integer(j, "local_rounds", "algorithm.local_rounds", r.local_rounds));
  r.local_steps = static_cast<int>(integer(j, "local_steps", "algorithm.local_steps", r.local_steps));
  r.T = static_cast<long>(integer(j, "T", "algorithm.T", r.T));
  r.epsilon = number(j, "epsilon", "algorithm.epsilon", r.epsilon);
  if (j.contains("x0")) {
    const auto x0 = array_of<double>(j, "x0", "algorithm.x0");
    r.x0 = Eigen::Map<const Vector>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  }
  if (!(r.gamma > 0.0)) throw ConfigError("algorithm.gamma", "must be > 0");
  if (!(r.alpha >= 0.0)) throw ConfigError("algorithm.alpha", "must be >= 0");
  if (r.local_rounds < 1) throw ConfigError("algorithm.local_rounds", "must be >= 1");
  if (r.local_steps < 1) throw ConfigError("algorithm.local_steps", "must be >= 1");
  if (r.T < 1) throw ConfigError("algorithm.T", "must be >= 1");
  if (!(r.epsilon > 0.0)) throw ConfigError("algorithm.epsilon", "must be > 0");
  if (r.kind == AlgorithmKind::FedAvgSppmAs && !(r.alpha > 0.0))
    throw ConfigError("algorithm.alpha", "fedavg_sppm_as needs alpha > 0");
  return r;
}

SweepGrid parse_sweep(const json& j) {
  allow_keys(j, "sweep", {"gammas", "K", "n_seeds", "t_max", "localgd"});
  SweepGrid g;
  g.gammas = array_of<double>(j, "gammas", "sweep.gammas");
  g.ks = array_of<int>(j, "K", "sweep.K");
  if (g.gammas.empty()) throw ConfigError("sweep.gammas", "required nonempty array");
  if (g.ks.empty()) throw ConfigError("sweep.K", "required nonempty array");
  for (double v : g.gammas)
    if (!(v > 0.0)) throw ConfigError("sweep.gammas", "values must be > 0");
  for (int k : g.ks)
    if (k < 1) throw ConfigError("sweep.K", "values must be >= 1");
  g.n_seeds = static_cast<int>(integer(j, "n_seeds", "sweep.n_seeds", g.n_seeds));
  g.t_max = static_cast<long>(integer(j, "t_max", "sweep.t_max", g.t_max));
  if (g.n_seeds < 1) throw ConfigError("sweep.n_seeds", "must be >= 1");
  if (g.t_max < 1) throw ConfigError("sweep.t_max", "must be >= 1");
  if (j.contains("localgd")) {
    const auto& l = j["localgd"];
    if (!l.is_object()) throw ConfigError("sweep.localgd", "expected an object");
    allow_keys(l, "sweep.localgd", {"alphas", "local_steps", "sampling"});
    g.localgd_alphas = array_of<double>(l, "alphas", "sweep.localgd.alphas");
    g.localgd_steps = array_of<int>(l, "local_steps", "sweep.localgd.local_steps");
    for (double a : g.localgd_alphas)
      if (!(a >= 0.0)) throw ConfigError("sweep.localgd.alphas", "values must be >= 0");
    for (int s : g.localgd_steps)
      if (s < 1) throw ConfigError("sweep.localgd.local_steps", "values must be >= 1");
    if (g.localgd_steps.empty()) g.localgd_steps = {5};
    if (l.contains("sampling")) g.localgd_sampling = l["sampling"];
  }
  return g;
}

}  // namespace

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  allow_keys(j, "", {"schema_version", "dataset", "algorithm", "sampling", "solver", "cost", "seed",
                     "seeds", "output_dir", "sweep"});
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    throw ConfigError("schema_version", "required integer");
  if (j["schema_version"].get<int>() != kConfigSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + j["schema_version"].dump() +
                                            " (expected " + std::to_string(kConfigSchemaVersion) + ")");
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.dataset = parse_dataset(object_at(j, "dataset", "dataset"), base_dir);
  cfg.run = parse_run(object_at(j, "algorithm", "algorithm"));
  cfg.sampling = object_at(j, "sampling", "sampling");
  // Structural check now; partitions named by reference are resolved later.
  {
    SchemeContext probe;
    probe.clusters = Partition{};
    probe.mu = {1.0};
    scheme_from_json(cfg.sampling, probe);
  }
  if (j.contains("solver")) {
    cfg.run.solver = solver_from_json(j["solver"]);
  } else if (cfg.run.kind == AlgorithmKind::SppmAs || cfg.run.kind == AlgorithmKind::FedProxSppmAs ||
             cfg.run.kind == AlgorithmKind::FedAvgSppmAs) {
    if (!std::holds_alternative<SyntheticQuadraticSource>(cfg.dataset))
      throw ConfigError("solver", "required for non-quadratic datasets");
  }
  if (j.contains("cost")) {
    const auto& c = j["cost"];
    if (!c.is_object()) throw ConfigError("cost", "expected an object");
    allow_keys(c, "cost", {"c1", "c2"});
    cfg.cost.c1 = number(c, "c1", "cost.c1", cfg.cost.c1);
    cfg.cost.c2 = number(c, "c2", "cost.c2", cfg.cost.c2);
    try {
      cfg.cost.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError("cost", e.what());
    }
  }
  if (j.contains("seed") && j.contains("seeds")) throw ConfigError("seeds", "give either seed or seeds");
  if (j.contains("seeds")) {
    const auto seeds = array_of<long long>(j, "seeds", "seeds");
    if (seeds.empty()) throw ConfigError("seeds", "must be nonempty");
    for (auto s : seeds) {
      if (s < 0) throw ConfigError("seeds", "values must be >= 0");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  } else {
    cfg.seeds.push_back(unsigned_integer(j, "seed", "seed", 0));
  }
  if (const char* env = std::getenv("FEDPROX_SIM_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-') throw ConfigError("FEDPROX_SIM_SEED", "not a nonnegative integer");
    cfg.seeds = {static_cast<std::uint64_t>(v)};
  }
  cfg.run.seed = cfg.seeds.front();
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("output_dir", "expected a string");
    cfg.output_dir = j["output_dir"].get<std::string>();
  } else {
    cfg.output_dir = "out";
  }
  if (cfg.output_dir.is_relative() && !base_dir.empty()) cfg.output_dir = (base_dir / cfg.output_dir).lexically_normal();
  if (j.contains("sweep")) {
    if (!j["sweep"].is_object()) throw ConfigError("sweep", "expected an object");
    cfg.sweep = parse_sweep(j["sweep"]);
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j, path.parent_path());
}

Problem build_problem(const ExperimentConfig& cfg) {
  Problem p;
  if (const auto* s = std::get_if<SyntheticQuadraticSource>(&cfg.dataset)) {
    const auto specs = synthetic_quadratic(s->n, s->d, s->seed, s->spread);
    p.clients = make_quadratic_objectives(specs);
  } else {
    const auto& l = std::get<LibsvmSource>(cfg.dataset);
    std::vector<DataPoint> points;
    try {
      points = load_libsvm(l.path.string());
    } catch (const ArgumentError& e) {
      throw ConfigError("dataset.path", e.what());
    } catch (const ParseError& e) {
      throw ConfigError("dataset.path", l.path.string() + ": " + e.what());
    }
    if (l.scale_max_abs) scale_max_abs(points);
    try {
      p.data = partition_noniid(points, l.clusters, l.clients_per_cluster, l.seed);
    } catch (const PartitionError& e) {
      throw ConfigError("dataset.clients_per_cluster", e.what());
    } catch (const ArgumentError& e) {
      throw ConfigError("dataset", e.what());
    }
    p.clients = make_logistic_objectives(*p.data, l.mu);
    p.context.clusters = p.data->cluster_partition();
  }
  p.context.mu = client_mus(p.clients);
  const auto xs = solve_xstar(p.clients);
  p.xstar = xs.x;
  p.xstar_grad_norm = xs.grad_norm;
  return p;
}

SamplingScheme resolve_sampling(const json& j, const Problem& problem) {
  auto s = scheme_from_json(j, problem.context);
  try {
    validate_scheme(s, static_cast<int>(problem.clients.size()));
  } catch (const ArgumentError& e) {
    throw ConfigError("sampling", e.what());
  }
  return s;
}

std::string content_hash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string config_hash(const json& j) { return content_hash(j.dump()); }

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* software_version() { return SPPM_VERSION; }

json RunManifest::to_json() const {
  json artifacts_json = json::array();
  for (const auto& a : artifacts) artifacts_json.push_back(a.string());
  return {{"config_hash", config_hash},
          {"seeds", seeds},
          {"artifacts", artifacts_json},
          {"software_version", software_version},
          {"wall_clock_seconds", wall_clock_seconds}};
}

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << bytes;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void prepare_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("output_dir", "cannot create '" + dir.string() + "': " + ec.message());
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json problem_json(const Problem& p) {
  json j{{"clients", p.clients.size()},
         {"dimension", p.xstar.size()},
         {"xstar_grad_norm", p.xstar_grad_norm}};
  if (p.data) j["partition"] = partition_manifest(*p.data);
  return j;
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, int jobs) {
  const auto start = std::chrono::steady_clock::now();
  const Problem problem = build_problem(cfg);
  RunConfig base = cfg.run;
  base.sampling = resolve_sampling(cfg.sampling, problem);
  try {
    base.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("algorithm", e.what());
  }
  if (base.x0 && base.x0->size() != problem.xstar.size())
    throw ConfigError("algorithm.x0", "length does not match the problem dimension");
  prepare_output(cfg.output_dir);

  const auto hash = config_hash(cfg.raw);
  const auto n = cfg.seeds.size();
  std::vector<std::string> csv(n);
  std::vector<StopReport> reports(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        RunConfig rc = base;
        rc.seed = cfg.seeds[i];
        const auto traj = run_algorithm(rc, problem.clients, problem.xstar);
        std::ostringstream out;
        write_trajectory_csv(out, traj);
        csv[i] = out.str();
        const bool fixed = rc.kind == AlgorithmKind::SppmAs ? rc.solver.rounds.has_value()
                                                            : true;
        const int k = rc.kind == AlgorithmKind::SppmAs ? rc.solver.rounds.value_or(1)
                      : (rc.kind == AlgorithmKind::FedProxSppmAs || rc.kind == AlgorithmKind::FedAvgSppmAs)
                          ? rc.local_rounds
                          : 1;
        reports[i] = stop_report(traj, rc.epsilon, fixed ? std::optional<int>(k) : std::nullopt);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  RunManifest m;
  m.config_hash = hash;
  m.seeds = cfg.seeds;
  m.software_version = software_version();
  for (std::size_t i = 0; i < n; ++i) {
    const auto seed = std::to_string(cfg.seeds[i]);
    const auto csv_path = cfg.output_dir / ("trajectory_seed" + seed + ".csv");
    const auto meta_path = cfg.output_dir / ("run_seed" + seed + ".json");
    write_file(csv_path, csv[i]);
    json meta{{"config", cfg.raw},
              {"config_hash", hash},
              {"seed", cfg.seeds[i]},
              {"algorithm", to_string(base.kind)},
              {"sampling", to_json(base.sampling)},
              {"solver", to_json(base.solver)},
              {"problem", problem_json(problem)},
              {"xstar", vector_json(problem.xstar)},
              {"trajectory", csv_path.filename().string()},
              {"trajectory_hash", content_hash(csv[i])},
              {"software_version", software_version()}};
    const auto& r = reports[i];
    meta["stop"] = {{"epsilon", base.epsilon},
                    {"reached", r.reached},
                    {"T_eps", r.t_eps ? json(*r.t_eps) : json(nullptr)},
                    {"total_rounds", r.total_rounds ? json(*r.total_rounds) : json(nullptr)}};
    write_file(meta_path, meta.dump(2) + "\n");
    m.artifacts.push_back(csv_path);
    m.artifacts.push_back(meta_path);
  }
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(cfg.output_dir / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

RunManifest sweep_experiment(const ExperimentConfig& cfg, int jobs) {
  if (!cfg.sweep) throw ConfigError("sweep", "required for the sweep command");
  const auto start = std::chrono::steady_clock::now();
  const Problem problem = build_problem(cfg);
  const auto& grid = *cfg.sweep;

  SweepSpec spec;
  spec.base = cfg.run;
  spec.base.sampling = resolve_sampling(cfg.sampling, problem);
  spec.base.seed = cfg.seeds.front();
  if (spec.base.kind != AlgorithmKind::SppmAs && spec.base.kind != AlgorithmKind::FedProxSppmAs &&
      spec.base.kind != AlgorithmKind::FedAvgSppmAs)
    throw ConfigError("algorithm.kind", "sweeps run a proximal method");
  if (spec.base.kind == AlgorithmKind::SppmAs && spec.base.solver.kind == SolverKind::Exact &&
      !std::holds_alternative<SyntheticQuadraticSource>(cfg.dataset))
    throw ConfigError("solver.solver", "exact prox needs a quadratic dataset");
  spec.gammas = grid.gammas;
  spec.ks = grid.ks;
  spec.epsilon = cfg.run.epsilon;
  spec.n_seeds = grid.n_seeds;
  spec.t_max = grid.t_max;
  spec.localgd_base = cfg.run;
  spec.localgd_base.kind = AlgorithmKind::LocalGD;
  spec.localgd_base.seed = cfg.seeds.front();
  spec.localgd_base.sampling = grid.localgd_sampling.is_null()
                                   ? spec.base.sampling
                                   : resolve_sampling(grid.localgd_sampling, problem);
  spec.localgd_alphas = grid.localgd_alphas;
  spec.localgd_steps = grid.localgd_steps;
  spec.jobs = jobs;
  prepare_output(cfg.output_dir);

  const auto result = sweep(spec, problem.clients, problem.xstar);

  RunManifest m;
  m.config_hash = config_hash(cfg.raw);
  for (int s = 0; s < grid.n_seeds; ++s) m.seeds.push_back(spec.base.seed + static_cast<std::uint64_t>(s));
  m.software_version = software_version();

  auto emit = [&](const char* name, const std::string& bytes) {
    const auto path = cfg.output_dir / name;
    write_file(path, bytes);
    m.artifacts.push_back(path);
  };
  std::ostringstream csv, localgd, dat;
  write_sweep_csv(csv, result, cfg.cost);
  write_localgd_csv(localgd, result, cfg.cost);
  write_sweep_gnuplot(dat, result, cfg.cost);
  emit("sweep.csv", csv.str());
  emit("localgd.csv", localgd.str());
  emit("sweep.dat", dat.str());
  auto summary = sweep_summary(result, cfg.cost);
  summary["config"] = cfg.raw;
  summary["config_hash"] = m.config_hash;
  summary["problem"] = problem_json(problem);
  summary["software_version"] = software_version();
  emit("summary.json", summary.dump(2) + "\n");
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(cfg.output_dir / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

}  // namespace sppm
