#pragma once

#include "sppm/objectives.hpp"

#include <nlohmann/json.hpp>

#include <optional>

namespace sppm {

enum class SolverKind { GD, NCG, BFGS, Exact };

/// How a proximal subproblem is solved. Exactly one stop rule: a fixed
/// number K of local communication rounds (outer iterations) or a residual
/// target |grad phi(z)| <= eps_prox.
struct SolverSpec {
  SolverKind kind = SolverKind::Exact;
  std::optional<int> rounds;       // K
  std::optional<double> eps_prox;
  std::optional<double> alpha;     // GD step; default 1/(L + 1/gamma)
  int max_rounds = 10000;          // cap for the eps_prox rule

  void validate() const;
};

/// phi(z) = f(z) + |z - center|^2 / (2 gamma)
struct ProxProblem {
  const Objective& f;
  const Vector& center;
  double gamma;

  double strong_convexity() const { return f.mu() + 1.0 / gamma; }
  double smoothness() const { return f.smoothness() + 1.0 / gamma; }
  double value_grad(const Vector& z, Vector& grad) const;
};

struct ProxResult {
  Vector z;
  int rounds_used = 0;
  /// Certified bound on |z - prox(center)|^2.
  double inexactness = 0.0;
};

ProxResult solve_prox(const ProxProblem& problem, const SolverSpec& spec);

/// (|grad phi(z)| / (mu_f + 1/gamma))^2, which bounds |z - prox|^2 by strong
/// convexity of phi.
double certify_inexactness(const ProxProblem& problem, const Vector& z);

/// Optional per-iteration hook, used by tests to observe phi(z_k) and
/// |grad phi(z_k)|. Called once for the start point (k = 0) and after each
/// outer iteration.
struct SolverTrace {
  std::vector<double> values;
  std::vector<double> grad_norms;
};
ProxResult solve_prox(const ProxProblem& problem, const SolverSpec& spec,
                      SolverTrace* trace);

const char* to_string(SolverKind k);
nlohmann::json to_json(const SolverSpec& s);
/// {solver: "gd"|"ncg"|"bfgs"|"exact", K?, eps_prox?, alpha?}
SolverSpec solver_from_json(const nlohmann::json& j);

}  // namespace sppm
