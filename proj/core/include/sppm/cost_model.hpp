#pragma once

#include "sppm/algorithms.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <vector>

namespace sppm {

/// c1: client-hub (local) unit cost, c2: hub-server (global) unit cost.
struct CostParams {
  double c1 = 1.0;
  double c2 = 0.0;

  static CostParams flat() { return {1.0, 0.0}; }
  void validate() const;
};

enum class CostKind { Prox, LocalGD };

/// Prox: (c1 K + c2) T.  LocalGD: (c1 + c2) T.
double total_cost(long T, long K, const CostParams& params, CostKind kind);

struct SweepSpec {
  /// Template for the prox runs; gamma and solver.rounds are overwritten per cell.
  RunConfig base;
  std::vector<double> gammas;
  std::vector<int> ks;
  double epsilon = 5e-3;
  int n_seeds = 5;
  long t_max = 500;
  /// LocalGD baseline grid; empty alphas skips the baseline.
  RunConfig localgd_base;
  std::vector<double> localgd_alphas;
  std::vector<int> localgd_steps;
  int jobs = 1;
};

struct SweepCell {
  double gamma = 0.0;
  int k = 0;
  std::optional<long> t_eps;       // median over seeds
  std::optional<long> t_eps_mean;  // mean over seeds
  bool reached() const { return t_eps.has_value(); }
};

struct BaselineCell {
  double alpha = 0.0;
  int local_steps = 0;
  std::optional<long> t_eps;
  std::optional<long> t_eps_mean;
  bool reached() const { return t_eps.has_value(); }
};

struct SweepOptimum {
  double gamma = 0.0;
  int k = 0;
  long t_eps = 0;
  double cost = 0.0;
};

struct BaselineOptimum {
  double alpha = 0.0;
  int local_steps = 0;
  long t_eps = 0;
  double cost = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // sorted by (gamma, K)
  std::vector<BaselineCell> baseline;
  double epsilon = 0.0;

  std::optional<double> cell_cost(const SweepCell& c, const CostParams& p) const;
  /// Cheapest reachable K per gamma; ties go to the smaller K.
  std::vector<SweepOptimum> per_gamma_optima(const CostParams& p) const;
  std::optional<SweepOptimum> best(const CostParams& p) const;
  std::optional<BaselineOptimum> baseline_best(const CostParams& p) const;
  /// 1 - best prox cost / best LocalGD cost.
  std::optional<double> reduction_vs_localgd(const CostParams& p) const;
};

/// Runs every (gamma, K) cell for n_seeds seeds in lockstep and records the
/// first round where the median squared distance reaches epsilon. Cells
/// that do not reach it within t_max are flagged unreachable.
SweepResult sweep(const SweepSpec& spec, const ObjectiveSet& clients, const Vector& xstar);

/// Lockstep helper shared by sweep cells: first round whose median (and
/// mean) squared distance over the seeds is <= epsilon.
struct SeedAggregate {
  std::optional<long> t_median;
  std::optional<long> t_mean;
};
SeedAggregate first_hit(const RunConfig& cfg, int n_seeds, long t_max, double epsilon,
                        const ObjectiveSet& clients, const Vector& xstar);

inline constexpr const char* kSweepHeader = "gamma,K,T_eps,total_cost,reached";

void write_sweep_csv(std::ostream& out, const SweepResult& r, const CostParams& p);
void write_localgd_csv(std::ostream& out, const SweepResult& r, const CostParams& p);
/// Blocks of "K total_cost" per gamma separated by two blank lines
/// (gnuplot `index`).
void write_sweep_gnuplot(std::ostream& out, const SweepResult& r, const CostParams& p);
nlohmann::json sweep_summary(const SweepResult& r, const CostParams& p);

}  // namespace sppm
