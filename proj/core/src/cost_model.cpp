#include "sppm/cost_model.hpp"

#include "sppm/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>

namespace sppm {

void CostParams::validate() const {
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw ArgumentError("cost: c1 and c2 must be >= 0");
  if (c1 == 0.0 && c2 == 0.0) throw ArgumentError("cost: c1 and c2 cannot both be zero");
}

double total_cost(long T, long K, const CostParams& params, CostKind kind) {
  if (T < 1 || K < 1) throw ArgumentError("total_cost: T and K must be >= 1");
  params.validate();
  const auto t = static_cast<double>(T);
  if (kind == CostKind::LocalGD) return (params.c1 + params.c2) * t;
  return (params.c1 * static_cast<double>(K) + params.c2) * t;
}

namespace {

double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// Runs tasks [0, count) on up to `jobs` threads; each task writes only its
// own slot, so results do not depend on scheduling.
template <class F>
void parallel_for(std::size_t count, int jobs, F&& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const auto i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          task(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

SeedAggregate first_hit(const RunConfig& cfg, int n_seeds, long t_max, double epsilon,
                        const ObjectiveSet& clients, const Vector& xstar) {
  if (n_seeds < 1) throw ArgumentError("first_hit: n_seeds must be >= 1");
  std::vector<Run> runs;
  runs.reserve(static_cast<std::size_t>(n_seeds));
  for (int s = 0; s < n_seeds; ++s) {
    RunConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(s);
    c.T = t_max;
    runs.emplace_back(std::move(c), clients, xstar);
  }
  std::vector<double> dist(static_cast<std::size_t>(n_seeds));
  std::vector<char> dead(static_cast<std::size_t>(n_seeds), 0);
  SeedAggregate out;
  for (long t = 1; t <= t_max && !(out.t_median && out.t_mean); ++t) {
    double sum = 0.0;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      if (!dead[s]) {
        try {
          dist[s] = runs[s].step().sq_dist;
        } catch (const DivergenceError&) {
          // diverged: +inf for the rest of the cell
          dead[s] = 1;
          dist[s] = std::numeric_limits<double>::infinity();
        }
      }
      sum += dist[s];
    }
    if (!out.t_median && median(dist) <= epsilon) out.t_median = t;
    if (!out.t_mean && sum / n_seeds <= epsilon) out.t_mean = t;
  }
  return out;
}

SweepResult sweep(const SweepSpec& spec, const ObjectiveSet& clients, const Vector& xstar) {
  if (spec.gammas.empty() || spec.ks.empty()) throw ArgumentError("sweep: grids must be nonempty");
  if (!(spec.epsilon > 0.0)) throw ArgumentError("sweep: epsilon must be > 0");
  if (spec.t_max < 1) throw ArgumentError("sweep: t_max must be >= 1");
  const auto kind = spec.base.kind;
  if (kind != AlgorithmKind::SppmAs && kind != AlgorithmKind::FedProxSppmAs &&
      kind != AlgorithmKind::FedAvgSppmAs)
    throw ArgumentError("sweep: the base run must be a proximal method");

  std::vector<double> gammas = spec.gammas;
  std::vector<int> ks = spec.ks;
  std::sort(gammas.begin(), gammas.end());
  gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() < 1) throw ArgumentError("sweep: K values must be >= 1");

  SweepResult r;
  r.epsilon = spec.epsilon;
  for (double g : gammas)
    for (int k : ks) r.cells.push_back({g, k, std::nullopt, std::nullopt});
  for (double a : spec.localgd_alphas)
    for (int s : spec.localgd_steps) r.baseline.push_back({a, s, std::nullopt, std::nullopt});

  const std::size_t prox_tasks = r.cells.size();
  parallel_for(prox_tasks + r.baseline.size(), spec.jobs, [&](std::size_t i) {
    if (i < prox_tasks) {
      auto& cell = r.cells[i];
      RunConfig cfg = spec.base;
      cfg.gamma = cell.gamma;
      if (kind == AlgorithmKind::SppmAs) {
        cfg.solver.rounds = cell.k;
        cfg.solver.eps_prox.reset();
      } else {
        cfg.local_rounds = cell.k;
      }
      const auto hit = first_hit(cfg, spec.n_seeds, spec.t_max, spec.epsilon, clients, xstar);
      cell.t_eps = hit.t_median;
      cell.t_eps_mean = hit.t_mean;
    } else {
      auto& cell = r.baseline[i - prox_tasks];
      RunConfig cfg = spec.localgd_base;
      cfg.kind = AlgorithmKind::LocalGD;
      cfg.alpha = cell.alpha;
      cfg.local_steps = cell.local_steps;
      const auto hit = first_hit(cfg, spec.n_seeds, spec.t_max, spec.epsilon, clients, xstar);
      cell.t_eps = hit.t_median;
      cell.t_eps_mean = hit.t_mean;
    }
  });
  return r;
}

std::optional<double> SweepResult::cell_cost(const SweepCell& c, const CostParams& p) const {
  if (!c.t_eps) return std::nullopt;
  return total_cost(*c.t_eps, c.k, p, CostKind::Prox);
}

std::vector<SweepOptimum> SweepResult::per_gamma_optima(const CostParams& p) const {
  std::vector<SweepOptimum> out;
  for (std::size_t i = 0; i < cells.size();) {
    const double g = cells[i].gamma;
    std::optional<SweepOptimum> best;
    for (; i < cells.size() && cells[i].gamma == g; ++i) {
      const auto cost = cell_cost(cells[i], p);
      if (cost && (!best || *cost < best->cost)) best = SweepOptimum{g, cells[i].k, *cells[i].t_eps, *cost};
    }
    if (best) out.push_back(*best);
  }
  return out;
}

std::optional<SweepOptimum> SweepResult::best(const CostParams& p) const {
  std::optional<SweepOptimum> out;
  for (const auto& o : per_gamma_optima(p))
    if (!out || o.cost < out->cost) out = o;
  return out;
}

std::optional<BaselineOptimum> SweepResult::baseline_best(const CostParams& p) const {
  std::optional<BaselineOptimum> out;
  for (const auto& c : baseline) {
    if (!c.t_eps) continue;
    const double cost = total_cost(*c.t_eps, 1, p, CostKind::LocalGD);
    if (!out || cost < out->cost) out = BaselineOptimum{c.alpha, c.local_steps, *c.t_eps, cost};
  }
  return out;
}

std::optional<double> SweepResult::reduction_vs_localgd(const CostParams& p) const {
  const auto b = best(p);
  const auto l = baseline_best(p);
  if (!b || !l) return std::nullopt;
  return 1.0 - b->cost / l->cost;
}

namespace {

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepResult& r, const CostParams& p) {
  out << kSweepHeader << '\n';
  for (const auto& c : r.cells) {
    out << real(c.gamma) << ',' << c.k << ',';
    if (const auto cost = r.cell_cost(c, p))
      out << *c.t_eps << ',' << real(*cost) << ",1\n";
    else
      out << ",,0\n";
  }
}

void write_localgd_csv(std::ostream& out, const SweepResult& r, const CostParams& p) {
  out << "kind,alpha,local_steps,T_eps,total_cost,reached\n";
  for (const auto& c : r.baseline) {
    out << "localgd," << real(c.alpha) << ',' << c.local_steps << ',';
    if (c.t_eps)
      out << *c.t_eps << ',' << real(total_cost(*c.t_eps, 1, p, CostKind::LocalGD)) << ",1\n";
    else
      out << ",,0\n";
  }
}

void write_sweep_gnuplot(std::ostream& out, const SweepResult& r, const CostParams& p) {
  bool first = true;
  for (std::size_t i = 0; i < r.cells.size();) {
    const double g = r.cells[i].gamma;
    if (!first) out << "\n\n";
    first = false;
    out << "# gamma=" << real(g) << "\n# K total_cost\n";
    for (; i < r.cells.size() && r.cells[i].gamma == g; ++i)
      if (const auto cost = r.cell_cost(r.cells[i], p))
        out << r.cells[i].k << ' ' << real(*cost) << '\n';
  }
  if (const auto l = r.baseline_best(p)) {
    out << "\n\n# localgd best (constant across K)\n# K total_cost\n";
    int k_min = std::numeric_limits<int>::max(), k_max = 0;
    for (const auto& c : r.cells) {
      k_min = std::min(k_min, c.k);
      k_max = std::max(k_max, c.k);
    }
    out << k_min << ' ' << real(l->cost) << '\n' << k_max << ' ' << real(l->cost) << '\n';
  }
}

nlohmann::json sweep_summary(const SweepResult& r, const CostParams& p) {
  nlohmann::json j;
  j["epsilon"] = r.epsilon;
  j["cost"] = {{"c1", p.c1}, {"c2", p.c2}};
  const auto base = r.baseline_best(p);
  nlohmann::json optima = nlohmann::json::array();
  for (const auto& o : r.per_gamma_optima(p)) {
    nlohmann::json e{{"gamma", o.gamma}, {"K", o.k}, {"T_eps", o.t_eps}, {"total_cost", o.cost}};
    e["reduction_vs_localgd_percent"] =
        base ? nlohmann::json(100.0 * (1.0 - o.cost / base->cost)) : nlohmann::json(nullptr);
    optima.push_back(e);
  }
  j["per_gamma"] = optima;
  if (const auto b = r.best(p))
    j["best"] = {{"gamma", b->gamma}, {"K", b->k}, {"T_eps", b->t_eps}, {"total_cost", b->cost}};
  else
    j["best"] = nullptr;
  if (base)
    j["localgd"] = {{"kind", "localgd"},
                    {"alpha", base->alpha},
                    {"local_steps", base->local_steps},
                    {"T_eps", base->t_eps},
                    {"total_cost", base->cost}};
  else
    j["localgd"] = nullptr;
  const auto red = r.reduction_vs_localgd(p);
  j["reduction_vs_localgd_percent"] = red ? nlohmann::json(100.0 * *red) : nlohmann::json(nullptr);
  // The same runs priced under the reference cost models.
  nlohmann::json models = nlohmann::json::object();
  for (const auto& [name, params] :
       {std::pair<const char*, CostParams>{"flat", CostParams::flat()},
        std::pair<const char*, CostParams>{"hierarchical", CostParams{0.1, 1.0}},
        std::pair<const char*, CostParams>{"unit_two_tier", CostParams{1.0, 1.0}}}) {
    const auto v = r.reduction_vs_localgd(params);
    models[name] = v ? nlohmann::json(100.0 * *v) : nlohmann::json(nullptr);
  }
  j["reduction_vs_localgd_percent_by_model"] = models;
  return j;
}

}  // namespace sppm
