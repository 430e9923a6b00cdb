#include "sppm/theory.hpp"

#include "sppm/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>
#include <string>

namespace sppm {

double sppm_neighborhood(double gamma, double mu_as, double sigma_sq) {
  return gamma * sigma_sq / (gamma * mu_as * mu_as + 2.0 * mu_as);
}

double theorem1_bound(double gamma, double mu_as, double sigma_sq, double r0_sq, double t) {
  if (!(gamma > 0.0) || !(mu_as > 0.0) || sigma_sq < 0.0 || r0_sq < 0.0 || t < 0.0)
    throw ArgumentError("theorem1_bound: need gamma, mu > 0 and sigma^2, R0^2, t >= 0");
  // (1 + gamma mu)^{-2t} through log1p
  return std::exp(-2.0 * t * std::log1p(gamma * mu_as)) * r0_sq + sppm_neighborhood(gamma, mu_as, sigma_sq);
}

IterationComplexity iteration_complexity(double epsilon, double mu_as, double sigma_sq,
                                         double r0_sq) {
  if (!(epsilon > 0.0)) throw ArgumentError("iteration_complexity: epsilon must be > 0");
  if (!(mu_as > 0.0) || sigma_sq < 0.0 || r0_sq < 0.0)
    throw ArgumentError("iteration_complexity: need mu > 0 and sigma^2, R0^2 >= 0");
  IterationComplexity out;
  const double log_term = std::log(2.0 * r0_sq / epsilon);
  double t = 0.0;
  if (sigma_sq == 0.0) {
    t = 0.5 * log_term;
  } else {
    out.gamma = epsilon * mu_as / sigma_sq;
    t = (sigma_sq / (2.0 * epsilon * mu_as * mu_as) + 0.5) * log_term;
  }
  out.t_min = t > 0.0 ? static_cast<std::int64_t>(std::ceil(t)) : 0;
  return out;
}

double inexact_bound(double gamma, double mu, double sigma_sq, double b, double s, double r0_sq,
                     double t) {
  const double gm = gamma * mu;
  const double denom = gm * gm + 2.0 * gm - s;
  if (!(s > 0.0) || !(denom > 0.0))
    throw ArgumentError("inexact_bound: s must lie in (0, gamma^2 mu^2 + 2 gamma mu)");
  if (b < 0.0) throw ArgumentError("inexact_bound: b must be >= 0");
  const double log_rate = std::log1p(s) - 2.0 * std::log1p(gm);
  const double floor =
      (1.0 + s) * (gamma * gamma * sigma_sq + b * (1.0 + gm) * (1.0 + gm) / s) / denom;
  return std::exp(t * log_rate) * r0_sq + floor;
}

double default_inexact_s(double gamma, double mu) {
  const double gm = gamma * mu;
  return std::min(gm, 0.5 * (gm * gm + 2.0 * gm));
}

double FedProxConstants::bound(double r0_sq, double t) const {
  return std::pow(A, t) * r0_sq + B / (1.0 - A);
}

FedProxConstants fedprox_constants(const SamplingDistribution& dist, std::span<const double> mu,
                                   std::span<const Vector> grads, double gamma) {
  if (!(gamma > 0.0)) throw ArgumentError("fedprox_constants: gamma must be > 0");
  if (mu.size() != static_cast<std::size_t>(dist.n()) || grads.size() != mu.size())
    throw ArgumentError("fedprox_constants: expected one mu and gradient per client");
  FedProxConstants c;
  for (const auto& atom : dist.support()) {
    double a = 0.0, b = 0.0;
    for (int i : atom.cohort) {
      const auto k = static_cast<std::size_t>(i);
      const double shrink = 1.0 / (1.0 + gamma * mu[k]);
      a += shrink;
      b += gamma * grads[k].squaredNorm() * shrink / mu[k];
    }
    const auto size = static_cast<double>(atom.cohort.size());
    c.A += atom.probability * a / size;
    c.B += atom.probability * b / size;
  }
  return c;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

XStar solve_xstar(const ObjectiveSet& clients, double tol, int max_iters) {
  if (clients.empty()) throw ArgumentError("solve_xstar: no clients");
  const auto f = full_objective(clients);
  XStar out;
  out.x = Vector::Zero(static_cast<Eigen::Index>(f.dimension()));
  Vector g;
  double value = f.value_grad(out.x, g);
  for (int it = 0;; ++it) {
    out.grad_norm = g.norm();
    out.iterations = it;
    if (out.grad_norm <= tol) return out;
    if (it >= max_iters)
      throw NumericError("solve_xstar: Newton stopped at |grad f| = " +
                         fmt(out.grad_norm) + " after " + std::to_string(max_iters) +
                         " iterations");
    const Eigen::LLT<Matrix> llt(f.hessian(out.x));
    if (llt.info() != Eigen::Success) throw NumericError("solve_xstar: Hessian not positive definite");
    const Vector step = -llt.solve(g);
    const double slope = g.dot(step);
    Vector trial_g;
    Vector trial = out.x + step;
    double trial_v = f.value_grad(trial, trial_g);
    // A full step that halves |grad f| is accepted without the Armijo test.
    if (!(trial_v <= value + 1e-4 * slope) && !(trial_g.norm() <= 0.5 * out.grad_norm)) {
      double t = 1.0;
      int backtracks = 0;
      do {
        t *= 0.5;
        trial = out.x + t * step;
        trial_v = f.value_grad(trial, trial_g);
      } while (!(trial_v <= value + 1e-4 * t * slope) && ++backtracks < 60);
      if (backtracks == 60)
        throw NumericError("solve_xstar: no progress at |grad f| = " + fmt(out.grad_norm));
    }
    out.x = std::move(trial);
    g = std::move(trial_g);
    value = trial_v;
  }
}

std::vector<Vector> client_gradients(const ObjectiveSet& clients, const Vector& x) {
  std::vector<Vector> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(c->gradient(x));
  return out;
}

std::vector<double> client_mus(const ObjectiveSet& clients) {
  std::vector<double> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(c->mu());
  return out;
}

}  // namespace sppm
