#include "sppm/prox_solvers.hpp"

#include "sppm/errors.hpp"

#include <cmath>
#include <limits>

namespace sppm {

void SolverSpec::validate() const {
  if (rounds && eps_prox) throw ArgumentError("solver: set only one of K and eps_prox");
  if (kind != SolverKind::Exact && !rounds && !eps_prox)
    throw ArgumentError("solver: one of K or eps_prox is required");
  if (rounds && *rounds < 1) throw ArgumentError("solver: K must be >= 1");
  if (eps_prox && !(*eps_prox > 0.0)) throw ArgumentError("solver: eps_prox must be > 0");
  if (alpha && !(*alpha > 0.0)) throw ArgumentError("solver: alpha must be > 0");
  if (max_rounds < 1) throw ArgumentError("solver: max_rounds must be >= 1");
}

double ProxProblem::value_grad(const Vector& z, Vector& grad) const {
  const double v = f.value_grad(z, grad);
  const Vector diff = z - center;
  grad += diff / gamma;
  return v + diff.squaredNorm() / (2.0 * gamma);
}

double certify_inexactness(const ProxProblem& problem, const Vector& z) {
  Vector g;
  problem.value_grad(z, g);
  const double r = g.norm() / problem.strong_convexity();
  return r * r;
}

namespace {

constexpr double kArmijoC = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr int kMaxBacktracks = 60;

struct Iterate {
  Vector z;
  Vector g;
  double value;
};

enum class StepOutcome { Moved, Stationary };

// Armijo backtracking from t = 1. The minimizer of the quadratic through
// phi(0), phi'(0) and phi(1) is tried first; on a quadratic phi it is the
// exact line minimizer, which conjugate-direction methods rely on.
StepOutcome line_search(const ProxProblem& problem, Iterate& it, const Vector& dir) {
  const double slope = it.g.dot(dir);
  const double scale = std::max(1.0, std::abs(it.value));
  Vector trial_g;
  Vector trial = it.z + dir;
  double trial_v = problem.value_grad(trial, trial_g);

  const double curvature = trial_v - it.value - slope;
  if (std::isfinite(trial_v) && curvature > 0.0) {
    const double tq = -slope / (2.0 * curvature);
    if (tq > 0.0 && tq != 1.0) {
      Vector zq = it.z + tq * dir;
      Vector gq;
      const double vq = problem.value_grad(zq, gq);
      if (vq <= it.value + kArmijoC * tq * slope && vq <= trial_v) {
        it = {std::move(zq), std::move(gq), vq};
        return StepOutcome::Moved;
      }
    }
  }

  double t = 1.0;
  for (int k = 0; k <= kMaxBacktracks; ++k) {
    if (std::isfinite(trial_v) && trial_v <= it.value + kArmijoC * t * slope) {
      it = {std::move(trial), std::move(trial_g), trial_v};
      return StepOutcome::Moved;
    }
    t *= kBacktrack;
    trial = it.z + t * dir;
    trial_v = problem.value_grad(trial, trial_g);
  }
  // With a descent direction Armijo can only fail once the predicted
  // decrease is lost in rounding of phi itself.
  if (std::isfinite(it.value) && std::abs(slope) <= 1e-8 * scale) return StepOutcome::Stationary;
  throw SolverStall("line search found no Armijo step after " +
                    std::to_string(kMaxBacktracks) + " backtracks");
}

void record(SolverTrace* trace, const Iterate& it) {
  if (!trace) return;
  trace->values.push_back(it.value);
  trace->grad_norms.push_back(it.g.norm());
}

struct StopRule {
  const SolverSpec& spec;
  int limit() const { return spec.rounds ? *spec.rounds : spec.max_rounds; }
  bool done(const Iterate& it) const { return spec.eps_prox && it.g.norm() <= *spec.eps_prox; }
};

}  // namespace

ProxResult solve_prox(const ProxProblem& problem, const SolverSpec& spec) {
  return solve_prox(problem, spec, nullptr);
}

ProxResult solve_prox(const ProxProblem& problem, const SolverSpec& spec, SolverTrace* trace) {
  spec.validate();
  if (!(problem.gamma > 0.0)) throw ArgumentError("prox: gamma must be > 0");

  ProxResult out;
  if (spec.kind == SolverKind::Exact) {
    out.z = exact_prox_quadratic(problem.f, problem.center, problem.gamma);
    out.rounds_used = spec.rounds.value_or(1);
    out.inexactness = certify_inexactness(problem, out.z);
    if (trace) {
      Iterate start{problem.center, {}, 0.0};
      start.value = problem.value_grad(start.z, start.g);
      record(trace, start);
      Iterate end{out.z, {}, 0.0};
      end.value = problem.value_grad(end.z, end.g);
      record(trace, end);
    }
    return out;
  }

  const StopRule stop{spec};
  Iterate it{problem.center, {}, 0.0};
  it.value = problem.value_grad(it.z, it.g);
  record(trace, it);

  int k = 0;
  bool stationary = false;
  const auto d = static_cast<int>(it.z.size());

  switch (spec.kind) {
    case SolverKind::GD: {
      const double alpha = spec.alpha.value_or(1.0 / problem.smoothness());
      for (; k < stop.limit() && !stop.done(it); ++k) {
        it.z -= alpha * it.g;
        it.value = problem.value_grad(it.z, it.g);
        record(trace, it);
      }
      break;
    }
    case SolverKind::NCG: {
      Vector dir = -it.g;
      int since_restart = 0;
      for (; k < stop.limit() && !stop.done(it); ++k) {
        if (!stationary && it.g.squaredNorm() > 0.0) {
          const Vector g_old = it.g;
          if (line_search(problem, it, dir) == StepOutcome::Stationary) {
            stationary = true;
          } else if (++since_restart >= d) {
            dir = -it.g;
            since_restart = 0;
          } else {
            // Polak-Ribiere+.
            const double beta = std::max(0.0, it.g.dot(it.g - g_old) / g_old.squaredNorm());
            dir = -it.g + beta * dir;
            if (it.g.dot(dir) >= 0.0) {
              dir = -it.g;
              since_restart = 0;
            }
          }
        }
        record(trace, it);
      }
      break;
    }
    case SolverKind::BFGS: {
      Matrix H = Matrix::Identity(d, d) / problem.smoothness();
      for (; k < stop.limit() && !stop.done(it); ++k) {
        if (!stationary && it.g.squaredNorm() > 0.0) {
          Vector dir = -H * it.g;
          if (it.g.dot(dir) >= 0.0) {
            H = Matrix::Identity(d, d) / problem.smoothness();
            dir = -H * it.g;
          }
          const Vector z_old = it.z;
          const Vector g_old = it.g;
          if (line_search(problem, it, dir) == StepOutcome::Stationary) {
            stationary = true;
          } else {
            const Vector s = it.z - z_old;
            const Vector y = it.g - g_old;
            const double sy = s.dot(y);
            if (sy > 0.0) {
              const double rho = 1.0 / sy;
              const Vector hy = H * y;
              // (I - rho s y') H (I - rho y s') + rho s s'
              H += (rho * rho * y.dot(hy) + rho) * s * s.transpose() -
                   rho * (hy * s.transpose() + s * hy.transpose());
            }
          }
        }
        record(trace, it);
      }
      break;
    }
    case SolverKind::Exact:
      break;
  }

  out.rounds_used = spec.rounds ? *spec.rounds : k;
  const double r = it.g.norm() / problem.strong_convexity();
  out.inexactness = r * r;
  out.z = std::move(it.z);
  return out;
}

const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::GD: return "gd";
    case SolverKind::NCG: return "ncg";
    case SolverKind::BFGS: return "bfgs";
    case SolverKind::Exact: return "exact";
  }
  return "?";
}

nlohmann::json to_json(const SolverSpec& s) {
  nlohmann::json j{{"solver", to_string(s.kind)}};
  if (s.rounds) j["K"] = *s.rounds;
  if (s.eps_prox) j["eps_prox"] = *s.eps_prox;
  if (s.alpha) j["alpha"] = *s.alpha;
  return j;
}

SolverSpec solver_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("solver", "expected an object");
  if (!j.contains("solver") || !j["solver"].is_string())
    throw ConfigError("solver.solver", "required string");
  SolverSpec s;
  const auto name = j["solver"].get<std::string>();
  if (name == "gd") s.kind = SolverKind::GD;
  else if (name == "ncg") s.kind = SolverKind::NCG;
  else if (name == "bfgs") s.kind = SolverKind::BFGS;
  else if (name == "exact") s.kind = SolverKind::Exact;
  else throw ConfigError("solver.solver", "unknown solver '" + name + "'");
  if (j.contains("K")) {
    if (!j["K"].is_number_integer()) throw ConfigError("solver.K", "expected an integer");
    s.rounds = j["K"].get<int>();
  }
  if (j.contains("eps_prox")) {
    if (!j["eps_prox"].is_number()) throw ConfigError("solver.eps_prox", "expected a number");
    s.eps_prox = j["eps_prox"].get<double>();
  }
  if (j.contains("alpha")) {
    if (!j["alpha"].is_number()) throw ConfigError("solver.alpha", "expected a number");
    s.alpha = j["alpha"].get<double>();
  }
  try {
    s.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("solver", e.what());
  }
  return s;
}

}  // namespace sppm
