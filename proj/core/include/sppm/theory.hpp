#pragma once

#include "sppm/objectives.hpp"
#include "sppm/sampling.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace sppm {

/// gamma sigma^2 / (gamma mu^2 + 2 mu)
double sppm_neighborhood(double gamma, double mu_as, double sigma_sq);

/// (1/(1 + gamma mu))^{2t} R0^2 + gamma sigma^2 / (gamma mu^2 + 2 mu)
double theorem1_bound(double gamma, double mu_as, double sigma_sq, double r0_sq,
                      double t);

struct IterationComplexity {
  /// nullopt: any stepsize works (sigma^2 = 0).
  std::optional<double> gamma;
  std::int64_t t_min = 0;
};

/// gamma = eps mu / sigma^2 and the smallest integer
/// t >= (sigma^2/(2 eps mu^2) + 1/2) log(2 R0^2 / eps) (clamped at 0).
IterationComplexity iteration_complexity(double epsilon, double mu_as,
                                         double sigma_sq, double r0_sq);

/// Bound for SPPM with a prox oracle accurate to |z - prox|^2 <= b:
/// ((1+s)/(1+gamma mu)^2)^t R0^2
///   + (1+s)(gamma^2 sigma^2 + b (1+gamma mu)^2 / s) / (gamma^2 mu^2 + 2 gamma mu - s)
/// Requires 0 < s < gamma^2 mu^2 + 2 gamma mu.
double inexact_bound(double gamma, double mu, double sigma_sq, double b, double s,
                     double r0_sq, double t);

/// min(gamma mu, (gamma^2 mu^2 + 2 gamma mu)/2)
double default_inexact_s(double gamma, double mu);

struct FedProxConstants {
  double A = 0.0;
  double B = 0.0;
  /// A^t R0^2 + B/(1 - A)
  double bound(double r0_sq, double t) const;
};

/// A_S = E[(1/|S|) sum 1/(1 + gamma mu_i)],
/// B_S = E[(1/|S|) sum gamma |g_i|^2 / ((1 + gamma mu_i) mu_i)].
FedProxConstants fedprox_constants(const SamplingDistribution& dist,
                                   std::span<const double> mu,
                                   std::span<const Vector> grads, double gamma);

struct XStar {
  Vector x;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton on f = (1/n) sum_i f_i until |grad f| <= tol.
XStar solve_xstar(const ObjectiveSet& clients, double tol = 1e-12, int max_iters = 200);

/// Client gradients at x and their mu values, the inputs of the sampling
/// constants.
std::vector<Vector> client_gradients(const ObjectiveSet& clients, const Vector& x);
std::vector<double> client_mus(const ObjectiveSet& clients);

}  // namespace sppm
