#include "sppm/algorithms.hpp"

#include "sppm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace sppm {

const char* to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::SppmAs: return "sppm_as";
    case AlgorithmKind::FedProxSppmAs: return "fedprox_sppm_as";
    case AlgorithmKind::FedAvgSppmAs: return "fedavg_sppm_as";
    case AlgorithmKind::LocalGD: return "localgd";
    case AlgorithmKind::MbGD: return "mb_gd";
    case AlgorithmKind::MbLocalGD: return "mb_localgd";
  }
  return "?";
}

AlgorithmKind algorithm_from_string(const std::string& s) {
  for (auto k : {AlgorithmKind::SppmAs, AlgorithmKind::FedProxSppmAs, AlgorithmKind::FedAvgSppmAs,
                 AlgorithmKind::LocalGD, AlgorithmKind::MbGD, AlgorithmKind::MbLocalGD})
    if (s == to_string(k)) return k;
  throw ArgumentError("unknown algorithm '" + s + "'");
}

namespace {

bool is_baseline(AlgorithmKind k) {
  return k == AlgorithmKind::LocalGD || k == AlgorithmKind::MbGD || k == AlgorithmKind::MbLocalGD;
}

}  // namespace

void RunConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ArgumentError("gamma must be a finite value > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ArgumentError("alpha must be >= 0");
  if (kind == AlgorithmKind::FedAvgSppmAs && !(alpha > 0.0))
    throw ArgumentError("fedavg_sppm_as needs an inner stepsize alpha > 0");
  if (local_rounds < 1) throw ArgumentError("local_rounds must be >= 1");
  if (local_steps < 1) throw ArgumentError("local_steps must be >= 1");
  if (T < 1) throw ArgumentError("T must be >= 1");
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be > 0");
  if (!is_baseline(kind)) solver.validate();
}

StopReport stop_report(const Trajectory& traj, double epsilon, std::optional<int> fixed_k) {
  StopReport r;
  for (const auto& row : traj) {
    if (row.t >= 1 && row.sq_dist <= epsilon) {
      r.reached = true;
      r.t_eps = row.t;
      if (fixed_k) r.total_rounds = row.t * *fixed_k;
      break;
    }
  }
  return r;
}

double default_baseline_stepsize(const ObjectiveSet& clients) {
  double l_max = 0.0;
  for (const auto& c : clients) l_max = std::max(l_max, c->smoothness());
  return 1.0 / (2.0 * l_max);
}

Run::Run(RunConfig cfg, const ObjectiveSet& clients, Vector xstar)
    : cfg_(std::move(cfg)),
      clients_(&clients),
      xstar_(std::move(xstar)),
      sampler_(cfg_.sampling, static_cast<int>(clients.size())) {
  cfg_.validate();
  if (clients.empty()) throw ArgumentError("run needs at least one client");
  const auto d = static_cast<Eigen::Index>(clients.front()->dimension());
  if (xstar_.size() != d) throw ArgumentError("xstar has the wrong dimension");
  x_ = cfg_.x0.value_or(Vector::Zero(d));
  if (x_.size() != d) throw ArgumentError("x0 has the wrong dimension");
  if (is_baseline(cfg_.kind))
    baseline_alpha_ = cfg_.alpha > 0.0 ? cfg_.alpha : default_baseline_stepsize(clients);
  initial_sq_dist_ = (x_ - xstar_).squaredNorm();
  rows_.reserve(static_cast<std::size_t>(cfg_.T) + 1);
  rows_.push_back({0, initial_sq_dist_, 0, 0, 0, 0.0});
}

const TrajectoryRow& Run::step() {
  ++round_;
  CounterRng rng(cfg_.seed, static_cast<std::uint64_t>(round_));
  const Cohort cohort = sampler_.draw(rng);

  double inexactness = 0.0;
  int rounds = 0;
  try {
    switch (cfg_.kind) {
      case AlgorithmKind::SppmAs: rounds = advance_sppm(cohort, inexactness); break;
      case AlgorithmKind::FedProxSppmAs: rounds = advance_fedprox(cohort, inexactness); break;
      case AlgorithmKind::FedAvgSppmAs: rounds = advance_fedavg(cohort, inexactness); break;
      case AlgorithmKind::LocalGD: rounds = advance_localgd(cohort); break;
      case AlgorithmKind::MbGD:
      case AlgorithmKind::MbLocalGD: rounds = advance_minibatch(cohort); break;
    }
  } catch (const SolverStall& e) {
    throw SolverStall(e.what(), round_);
  }

  const double sq = (x_ - xstar_).squaredNorm();
  if (!std::isfinite(sq) || sq > 1e12 * std::max(initial_sq_dist_, 1.0))
    throw DivergenceError(round_, sq);

  const auto& prev = rows_.back();
  rows_.push_back({round_, sq, rounds, prev.cum_local + rounds, round_,
                   std::max(prev.certified_b, inexactness)});
  return rows_.back();
}

int Run::advance_sppm(const Cohort& cohort, double& inexactness) {
  std::vector<CohortMember> members;
  members.reserve(cohort.indices.size());
  for (std::size_t j = 0; j < cohort.indices.size(); ++j)
    members.push_back({cohort.indices[j], cohort.weights[j]});
  const CohortObjective f(*clients_, std::move(members));
  const ProxProblem problem{f, x_, cfg_.gamma};
  auto res = solve_prox(problem, cfg_.solver);
  x_ = std::move(res.z);
  inexactness = res.inexactness;
  return res.rounds_used;
}

namespace {

// One inner averaging round: the mean of per-client proxes at y.
Vector averaged_prox(const std::vector<const Objective*>& fs, const Vector& y, double gamma,
                     const SolverSpec& solver, double& inexactness) {
  Vector sum = Vector::Zero(y.size());
  for (const auto* f : fs) {
    const ProxProblem problem{*f, y, gamma};
    const auto res = solve_prox(problem, solver);
    sum += res.z;
    inexactness = std::max(inexactness, res.inexactness);
  }
  return sum / static_cast<double>(fs.size());
}

}  // namespace

int Run::advance_fedprox(const Cohort& cohort, double& inexactness) {
  std::vector<const Objective*> fs;
  for (int i : cohort.indices) fs.push_back((*clients_)[static_cast<std::size_t>(i)].get());
  for (int k = 0; k < cfg_.local_rounds; ++k)
    x_ = averaged_prox(fs, x_, cfg_.gamma, cfg_.solver, inexactness);
  return cfg_.local_rounds;
}

int Run::advance_fedavg(const Cohort& cohort, double& inexactness) {
  std::vector<ShiftedObjective> shifted;
  shifted.reserve(cohort.indices.size());
  for (int i : cohort.indices)
    shifted.emplace_back((*clients_)[static_cast<std::size_t>(i)], x_, cfg_.gamma);
  std::vector<const Objective*> fs;
  for (const auto& s : shifted) fs.push_back(&s);
  Vector y = x_;
  for (int k = 0; k < cfg_.local_rounds; ++k)
    y = averaged_prox(fs, y, cfg_.alpha, cfg_.solver, inexactness);
  x_ = std::move(y);
  return cfg_.local_rounds;
}

Vector Run::local_gd(int client, const Vector& start, int steps) const {
  const auto& f = *(*clients_)[static_cast<std::size_t>(client)];
  Vector x = start;
  Vector g;
  for (int s = 0; s < steps; ++s) {
    f.value_grad(x, g);
    x -= baseline_alpha_ * g;
  }
  return x;
}

int Run::advance_localgd(const Cohort& cohort) {
  Vector sum = Vector::Zero(x_.size());
  for (int i : cohort.indices) sum += local_gd(i, x_, cfg_.local_steps);
  x_ = sum / static_cast<double>(cohort.indices.size());
  return 1;
}

int Run::advance_minibatch(const Cohort& cohort) {
  Vector update = Vector::Zero(x_.size());
  if (cfg_.kind == AlgorithmKind::MbGD) {
    Vector g;
    for (std::size_t j = 0; j < cohort.indices.size(); ++j) {
      (*clients_)[static_cast<std::size_t>(cohort.indices[j])]->value_grad(x_, g);
      update += cohort.weights[j] * g;
    }
    x_ -= baseline_alpha_ * update;
  } else {
    for (std::size_t j = 0; j < cohort.indices.size(); ++j)
      update += cohort.weights[j] * (x_ - local_gd(cohort.indices[j], x_, cfg_.local_steps));
    x_ -= update;
  }
  return 1;
}

Trajectory run_algorithm(const RunConfig& cfg, const ObjectiveSet& clients, const Vector& xstar) {
  Run run(cfg, clients, xstar);
  for (long t = 0; t < cfg.T; ++t) run.step();
  return run.trajectory();
}

namespace {

Trajectory run_as(RunConfig cfg, AlgorithmKind kind, const ObjectiveSet& clients,
                  const Vector& xstar) {
  cfg.kind = kind;
  return run_algorithm(cfg, clients, xstar);
}

}  // namespace

Trajectory run_sppm_as(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar) {
  return run_as(std::move(cfg), AlgorithmKind::SppmAs, clients, xstar);
}
Trajectory run_fedprox_sppm_as(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar) {
  return run_as(std::move(cfg), AlgorithmKind::FedProxSppmAs, clients, xstar);
}
Trajectory run_fedavg_sppm_as(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar) {
  return run_as(std::move(cfg), AlgorithmKind::FedAvgSppmAs, clients, xstar);
}
Trajectory run_localgd(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar) {
  return run_as(std::move(cfg), AlgorithmKind::LocalGD, clients, xstar);
}
Trajectory run_mb_gd(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar) {
  return run_as(std::move(cfg), AlgorithmKind::MbGD, clients, xstar);
}
Trajectory run_mb_localgd(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar) {
  return run_as(std::move(cfg), AlgorithmKind::MbLocalGD, clients, xstar);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << kTrajectoryHeader << '\n';
  char buf[160];
  for (const auto& r : traj) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%d,%ld,%ld,%.17g\n", r.t, r.sq_dist, r.rounds_local,
                  r.cum_local, r.cum_global, r.certified_b);
    out << buf;
  }
}

MonteCarloCurve monte_carlo_sq_dist(const RunConfig& cfg, const ObjectiveSet& clients,
                                    const Vector& xstar, int n_seeds) {
  if (n_seeds < 2) throw ArgumentError("monte_carlo_sq_dist: need at least 2 seeds");
  const auto len = static_cast<std::size_t>(cfg.T) + 1;
  std::vector<double> mean(len, 0.0), m2(len, 0.0);
  for (int s = 0; s < n_seeds; ++s) {
    RunConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(s);
    const auto traj = run_algorithm(c, clients, xstar);
    for (std::size_t t = 0; t < len; ++t) {
      const double delta = traj[t].sq_dist - mean[t];
      mean[t] += delta / (s + 1);
      m2[t] += delta * (traj[t].sq_dist - mean[t]);
    }
  }
  MonteCarloCurve out;
  out.mean = std::move(mean);
  out.std_error.resize(len);
  for (std::size_t t = 0; t < len; ++t)
    out.std_error[t] = std::sqrt(m2[t] / (n_seeds - 1) / n_seeds);
  return out;
}

}  // namespace sppm
