#pragma once

#include "sppm/objectives.hpp"
#include "sppm/prox_solvers.hpp"
#include "sppm/sampling.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sppm {

enum class AlgorithmKind {
  SppmAs,        // x <- prox_{gamma f_S}(x)
  FedProxSppmAs, // K rounds of x <- mean_{i in S} prox_{gamma f_i}(x)
  FedAvgSppmAs,  // same on f_i + |. - x_t|^2/(2 gamma) with stepsize alpha
  LocalGD,
  MbGD,
  MbLocalGD,
};

const char* to_string(AlgorithmKind k);
AlgorithmKind algorithm_from_string(const std::string& s);

struct RunConfig {
  AlgorithmKind kind = AlgorithmKind::SppmAs;
  double gamma = 1.0;
  /// FedAvg-SPPM-AS inner prox stepsize, or the GD stepsize of the
  /// baselines. Zero selects the default 1/(2 L_max) for the baselines.
  double alpha = 0.0;
  /// Inner averaging rounds K of FedProx-/FedAvg-SPPM-AS.
  int local_rounds = 1;
  /// Local GD steps per round of LocalGD and MB-LocalGD.
  int local_steps = 5;
  SamplingScheme sampling = scheme::Full{};
  /// Cohort prox for SPPM-AS, per-client prox for FedProx/FedAvg.
  SolverSpec solver;
  long T = 100;
  double epsilon = 1e-3;
  std::uint64_t seed = 0;
  std::optional<Vector> x0;  // zero vector when unset

  void validate() const;
};

/// One global round. Row 0 is the starting point.
struct TrajectoryRow {
  long t = 0;
  double sq_dist = 0.0;
  int rounds_local = 0;
  long cum_local = 0;
  long cum_global = 0;
  double certified_b = 0.0;  // max inexactness so far
};

using Trajectory = std::vector<TrajectoryRow>;

struct StopReport {
  bool reached = false;
  std::optional<long> t_eps;
  std::optional<long> total_rounds;  // T_eps * K for fixed-K runs
};

/// First t >= 1 whose squared distance is <= epsilon.
StopReport stop_report(const Trajectory& traj, double epsilon,
                       std::optional<int> fixed_k = {});

/// A run as a state machine over global rounds; `step` advances one round.
/// Cohort draws use a counter-based stream keyed by (seed, round), so the
/// cohort sequence does not depend on the algorithm or solver.
class Run {
 public:
  Run(RunConfig cfg, const ObjectiveSet& clients, Vector xstar);

  const TrajectoryRow& step();
  long round() const { return round_; }
  const Vector& x() const { return x_; }
  const Trajectory& trajectory() const { return rows_; }
  const RunConfig& config() const { return cfg_; }

 private:
  int advance_sppm(const Cohort& cohort, double& inexactness);
  int advance_fedprox(const Cohort& cohort, double& inexactness);
  int advance_fedavg(const Cohort& cohort, double& inexactness);
  int advance_localgd(const Cohort& cohort);
  int advance_minibatch(const Cohort& cohort);
  Vector local_gd(int client, const Vector& start, int steps) const;

  RunConfig cfg_;
  const ObjectiveSet* clients_;
  Vector xstar_;
  CohortSampler sampler_;
  Vector x_;
  double baseline_alpha_ = 0.0;
  double initial_sq_dist_ = 0.0;
  long round_ = 0;
  Trajectory rows_;
};

/// Runs cfg.T global rounds.
Trajectory run_algorithm(const RunConfig& cfg, const ObjectiveSet& clients,
                         const Vector& xstar);

Trajectory run_sppm_as(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar);
Trajectory run_fedprox_sppm_as(RunConfig cfg, const ObjectiveSet& clients,
                               const Vector& xstar);
Trajectory run_fedavg_sppm_as(RunConfig cfg, const ObjectiveSet& clients,
                              const Vector& xstar);
Trajectory run_localgd(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar);
Trajectory run_mb_gd(RunConfig cfg, const ObjectiveSet& clients, const Vector& xstar);
Trajectory run_mb_localgd(RunConfig cfg, const ObjectiveSet& clients,
                          const Vector& xstar);

/// Mean and standard error of |x_t - x*|^2 over seeds cfg.seed + s,
/// s = 0..n_seeds-1, for t = 0..cfg.T.
struct MonteCarloCurve {
  std::vector<double> mean;
  std::vector<double> std_error;
};
MonteCarloCurve monte_carlo_sq_dist(const RunConfig& cfg, const ObjectiveSet& clients,
                                    const Vector& xstar, int n_seeds);

/// 1/(2 max_i L_i)
double default_baseline_stepsize(const ObjectiveSet& clients);

inline constexpr const char* kTrajectoryHeader =
    "t,sq_dist,rounds_local,cum_local,cum_global,certified_b";

/// Reals are printed with 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace sppm
