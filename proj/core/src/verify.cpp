#include "sppm/verify.hpp"

#include "sppm/algorithms.hpp"
#include "sppm/cost_model.hpp"
#include "sppm/data_ingest.hpp"
#include "sppm/errors.hpp"
#include "sppm/objectives.hpp"
#include "sppm/prox_solvers.hpp"
#include "sppm/rng.hpp"
#include "sppm/sampling.hpp"
#include "sppm/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace sppm {

bool VerifyReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.pass; });
}

namespace {

double normal(CounterRng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Vector random_vector(CounterRng& rng, int d) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = normal(rng);
  return v;
}

// Gradients at a minimizer sum to zero; mimic that.
std::vector<Vector> centered_grads(std::uint64_t seed, int n, int d) {
  CounterRng rng(seed, 1);
  std::vector<Vector> g;
  Vector mean = Vector::Zero(d);
  for (int i = 0; i < n; ++i) {
    g.push_back(random_vector(rng, d));
    mean += g.back();
  }
  mean /= n;
  for (auto& v : g) v -= mean;
  return g;
}

std::vector<double> random_mu(std::uint64_t seed, int n) {
  CounterRng rng(seed, 2);
  std::vector<double> mu;
  for (int i = 0; i < n; ++i) mu.push_back(0.1 + 2.0 * rng.uniform());
  return mu;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// Tracks the worst value of a randomized property and the seed producing it.
struct Worst {
  double value = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  void update(double v, std::uint64_t s) {
    if (v > value || std::isnan(v)) {
      value = v;
      seed = s;
    }
  }
};

class Suite {
 public:
  explicit Suite(VerifyReport& r) : report_(r) {}

  void at_most(const char* module, const char* property, double empirical, double bound,
               std::uint64_t seed = 0) {
    report_.checks.push_back({module, property, empirical, bound, empirical <= bound, seed});
  }
  void at_most(const char* module, const char* property, const Worst& w, double bound) {
    at_most(module, property, w.value, bound, w.seed);
  }
  void equals(const char* module, const char* property, double empirical, double expected,
              double tol) {
    report_.checks.push_back(
        {module, property, empirical, expected, std::abs(empirical - expected) <= tol, 0});
  }

 private:
  VerifyReport& report_;
};

Partition contiguous_blocks(int n, int b) {
  Partition p(static_cast<std::size_t>(b));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i * b / n)].push_back(i);
  return p;
}

SamplingConstants exact(const SamplingScheme& s, std::span<const double> mu,
                        std::span<const Vector> g) {
  const auto dist = build_distribution(s, static_cast<int>(mu.size()));
  return {mu_as(dist, mu), sigma_star_as(dist, g), ConstantsMethod::ExactEnumeration, 0.0};
}

void sampling_suite(Suite& s, const VerifyHooks& hooks) {
  const auto closed = hooks.sigma_nice_closed_form ? hooks.sigma_nice_closed_form
                                                   : std::function<double(double, int, int)>(sigma_nice_closed_form);
  Worst nice_err;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (int n = 2; n <= 8; ++n) {
      const auto g = centered_grads(seed * 100 + static_cast<std::uint64_t>(n), n, 3);
      double s1 = 0.0;
      for (const auto& v : g) s1 += v.squaredNorm();
      s1 /= n;
      for (int tau = 1; tau <= n; ++tau) {
        const auto dist = build_distribution(scheme::Nice{tau}, n);
        const double e = sigma_star_as(dist, g);
        const double c = closed(s1, n, tau);
        nice_err.update(std::abs(e - c) / std::max(s1, 1e-300), seed);
      }
    }
  s.at_most("sampling", "sigma^2_NICE enumeration = closed form (n<=8), rel err", nice_err, 1e-10);

  Worst unbiased, marg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const int n = 6;
    const auto specs = synthetic_quadratic(n, 3, seed, 1.0);
    const auto clients = make_quadratic_objectives(specs);
    const auto full = full_objective(clients);
    CounterRng rng(seed, 3);
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& v : p) total += (v = 0.2 + rng.uniform());
    for (auto& v : p) v /= total;
    const std::vector<SamplingScheme> schemes{
        scheme::Full{}, scheme::Nice{2}, scheme::Nice{4}, scheme::Nonuniform{p},
        scheme::Block{contiguous_blocks(n, 3), {0.5, 0.3, 0.2}},
        scheme::Stratified{contiguous_blocks(n, 2)}, scheme::Importance{client_mus(clients)}};
    for (const auto& sch : schemes) {
      const auto dist = build_distribution(sch, n);
      const auto ref = marginals_of(sch, n);
      for (int i = 0; i < n; ++i)
        marg.update(std::abs(dist.marginals()[static_cast<std::size_t>(i)] - ref[static_cast<std::size_t>(i)]), seed);
      const Vector x = random_vector(rng, 3);
      double avg = 0.0;
      for (std::size_t a = 0; a < dist.support().size(); ++a) {
        const auto c = dist.cohort(a);
        std::vector<CohortMember> m;
        for (std::size_t j = 0; j < c.indices.size(); ++j) m.push_back({c.indices[j], c.weights[j]});
        avg += dist.support()[a].probability * CohortObjective(clients, m).value(x);
      }
      unbiased.update(rel(avg, full.value(x)), seed);
    }
  }
  s.at_most("sampling", "E[f_S(x)] = f(x) over the support, rel err", unbiased, 1e-12);
  s.at_most("sampling", "support marginals = scheme marginals, abs err", marg, 1e-12);

  Worst mono;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto mu = random_mu(seed, 7);
    const std::vector<Vector> g(7, Vector::Zero(1));
    double prev = -std::numeric_limits<double>::infinity();
    for (int tau = 1; tau <= 7; ++tau) {
      const double m = exact(scheme::Nice{tau}, mu, g).mu_as;
      mono.update(prev - m, seed);
      prev = m;
    }
  }
  s.at_most("sampling", "mu_NICE(tau) nondecreasing, max drop", mono, 0.0);

  Worst collapse;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 6;
    const auto g = centered_grads(seed, n, 2);
    const auto mu = random_mu(seed, n);
    CounterRng rng(seed, 4);
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& v : p) total += (v = 0.1 + rng.uniform());
    for (auto& v : p) v /= total;
    Partition singletons;
    for (int i = 0; i < n; ++i) singletons.push_back({i});
    auto cmp = [&](const SamplingConstants& a, const SamplingConstants& b) {
      collapse.update(rel(a.mu_as, b.mu_as), seed);
      collapse.update(std::abs(a.sigma_star_sq - b.sigma_star_sq) / std::max(1.0, b.sigma_star_sq), seed);
    };
    cmp(exact(scheme::Block{contiguous_blocks(n, 1), {1.0}}, mu, g), exact(scheme::Full{}, mu, g));
    cmp(exact(scheme::Block{singletons, p}, mu, g), exact(scheme::Nonuniform{p}, mu, g));
    cmp(exact(scheme::Stratified{contiguous_blocks(n, 1)}, mu, g), exact(scheme::Nice{1}, mu, g));
    cmp(exact(scheme::Stratified{singletons}, mu, g), exact(scheme::Full{}, mu, g));
  }
  s.at_most("sampling", "block/stratified extreme cases collapse, rel err", collapse, 1e-12);

  Worst ss_bounds, order;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterRng rng(seed, 5);
    const int n = 2 + static_cast<int>(rng.below(8));
    const int b = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const auto g = centered_grads(seed, n, 2);
    const auto blocks = contiguous_blocks(n, b);
    const double exact_ss = sigma_star_as(build_distribution(scheme::Stratified{blocks}, n), g);
    const auto bounds = ss_variance_upper_bound(blocks, cluster_sigma_sq(blocks, g));
    double scale = 0.0;
    for (const auto& v : g) scale += v.squaredNorm();
    ss_bounds.update(exact_ss - bounds.weighted * (1 + 1e-12) - 1e-15 * scale, seed);
    order.update(bounds.weighted - bounds.worst * (1 + 1e-12), seed);
  }
  s.at_most("sampling", "sigma^2_SS <= (b/n^2) sum |C_j|^2 sigma_j^2", ss_bounds, 0.0);
  s.at_most("sampling", "(b/n^2) sum |C_j|^2 sigma_j^2 <= b max sigma_j^2", order, 0.0);

  Worst vs_nice;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = centered_grads(seed, 4, 2);
    const auto r = optimal_ss_clustering(g, 2);
    const double nice = sigma_star_as(build_distribution(scheme::Nice{2}, 4), g);
    vs_nice.update(r.sigma_sq - nice * (1 + 1e-12), seed);
  }
  s.at_most("sampling", "optimal SS clustering <= sigma^2_NICE (n=4, b=2)", vs_nice, 0.0);
}

void objectives_suite(Suite& s) {
  Worst fixed, contract, residual;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto specs = synthetic_quadratic(1, 4, seed, 1.0);
    const QuadraticObjective f(specs[0]);
    CounterRng rng(seed, 6);
    const double gamma = std::exp(3.0 * normal(rng));
    const Vector xs = f.minimizer();
    const Vector probe = random_vector(rng, 4);
    const Vector shifted = probe + gamma * f.gradient(probe);
    fixed.update((exact_prox_quadratic(f, shifted, gamma) - probe).norm() / std::max(1.0, probe.norm()), seed);
    const Vector x = random_vector(rng, 4), y = random_vector(rng, 4);
    const double lhs = (exact_prox_quadratic(f, x, gamma) - exact_prox_quadratic(f, y, gamma)).norm();
    contract.update(lhs - (x - y).norm() / (1.0 + gamma * f.mu()) * (1 + 1e-12), seed);
    const Vector z = exact_prox_quadratic(f, x, gamma);
    residual.update((f.gradient(z) + (z - x) / gamma).norm(), seed);
    (void)xs;
  }
  s.at_most("objectives", "prox(x + gamma grad f(x)) = x, rel err", fixed, 1e-10);
  s.at_most("objectives", "prox contractive by 1/(1+gamma mu)", contract, 0.0);
  s.at_most("objectives", "exact prox optimality residual", residual, 1e-10);

  Worst convex;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto clients = make_quadratic_objectives(synthetic_quadratic(3, 3, seed, 1.0));
    CounterRng rng(seed, 7);
    for (int k = 0; k < 100; ++k) {
      const Vector x = random_vector(rng, 3), y = random_vector(rng, 3);
      for (const auto& f : clients) {
        const double gap = f->value(y) + f->gradient(y).dot(x - y) + 0.5 * f->mu() * (x - y).squaredNorm() -
                           f->value(x);
        convex.update(gap / std::max(1.0, std::abs(f->value(x))), seed);
      }
    }
  }
  s.at_most("objectives", "strong convexity inequality on probes", convex, 1e-12);
}

void theory_suite(Suite& s) {
  Worst hood, roundtrip, limit;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterRng rng(seed, 8);
    const double gamma = std::exp(4.0 * normal(rng));
    const double mu = std::exp(normal(rng));
    const double sigma = std::exp(normal(rng));
    const double r0 = std::exp(normal(rng));
    const double nb = sppm_neighborhood(gamma, mu, sigma);
    hood.update(nb - std::min(sigma / (mu * mu), gamma * sigma / mu) * (1 + 1e-12), seed);
    const double eps = sigma / (mu * mu) * (0.01 + rng.uniform());
    const auto ic = iteration_complexity(eps, mu, sigma, r0);
    roundtrip.update(theorem1_bound(*ic.gamma, mu, sigma, r0, static_cast<double>(ic.t_min)) / eps - 1.0, seed);
    const double t = static_cast<double>(rng.below(30));
    limit.update(rel(inexact_bound(gamma, mu, sigma, 0.0, 1e-12, r0, t), theorem1_bound(gamma, mu, sigma, r0, t)),
                 seed);
  }
  s.at_most("theory", "neighborhood <= min(sigma^2/mu^2, gamma sigma^2/mu)", hood, 0.0);
  s.at_most("theory", "bound at returned (gamma, t_min) <= eps, rel excess", roundtrip, 1e-12);
  s.at_most("theory", "inexact bound with b=0, s->0 matches exact bound", limit, 1e-6);

  // Recurrence fact: r_{t+1} <= a r_t + b unrolls to a^t r_0 + b (1 - a^t)/(1 - a).
  Worst recur;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    CounterRng rng(seed, 9);
    const double a = rng.uniform() * 0.999, b = rng.uniform(), s0 = 10.0 * rng.uniform();
    const int t = 1 + static_cast<int>(rng.below(50));
    double r = s0;
    for (int k = 0; k < t; ++k) r = a * r + b;
    const double closed = std::pow(a, t) * s0 + b * (1.0 - std::pow(a, t)) / (1.0 - a);
    recur.update(rel(r, closed), seed);
  }
  s.at_most("theory", "unrolled linear recurrence = closed form", recur, 1e-12);

  Worst fed;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 5;
    const auto mu = random_mu(seed, n);
    const auto g = centered_grads(seed, n, 2);
    const auto dist = build_distribution(scheme::Nice{2}, n);
    double prev = 1.0;
    for (double gamma : {0.01, 0.1, 1.0, 10.0}) {
      const auto c = fedprox_constants(dist, mu, g, gamma);
      fed.update(c.A - prev, seed);
      prev = c.A;
    }
  }
  s.at_most("theory", "FedProx A_S strictly decreasing in gamma", fed, -1e-15);
}

void prox_suite(Suite& s) {
  Worst certified, bfgs, ncg, mono;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int d = 4;
    const auto clients = make_quadratic_objectives(synthetic_quadratic(3, d, seed, 1.0));
    const auto f = full_objective(clients);
    CounterRng rng(seed, 10);
    const Vector x = random_vector(rng, d);
    const double gamma = std::exp(2.0 * normal(rng));
    const ProxProblem problem{f, x, gamma};
    const Vector truth = exact_prox_quadratic(f, x, gamma);
    const Vector z = truth + 0.1 * random_vector(rng, d);
    certified.update((z - truth).squaredNorm() - certify_inexactness(problem, z), seed);
    SolverTrace trace;
    const auto rb = solve_prox(problem, {SolverKind::BFGS, d + 1, {}, {}}, &trace);
    bfgs.update((rb.z - truth).norm(), seed);
    for (std::size_t k = 1; k < trace.values.size(); ++k)
      mono.update(trace.values[k] - trace.values[k - 1], seed);
    const auto rn = solve_prox(problem, {SolverKind::NCG, d + 1, {}, {}});
    ncg.update((rn.z - truth).norm(), seed);
  }
  s.at_most("prox_solvers", "certified b >= true |z - prox|^2 (excess)", certified, 0.0);
  s.at_most("prox_solvers", "BFGS with K = d+1 matches exact prox", bfgs, 1e-8);
  s.at_most("prox_solvers", "NCG with K = d+1 matches exact prox", ncg, 1e-8);
  s.at_most("prox_solvers", "phi(z_k) nonincreasing under BFGS", mono, 1e-12);
}

void cost_suite(Suite& s) {
  s.equals("cost_model", "flat cost T=5 K=3", total_cost(5, 3, CostParams::flat(), CostKind::Prox), 15.0, 0.0);
  s.equals("cost_model", "hierarchical cost T=5 K=3", total_cost(5, 3, {0.1, 1.0}, CostKind::Prox), 6.5, 1e-12);
  s.equals("cost_model", "LocalGD flat cost T=39", total_cost(39, 1, CostParams::flat(), CostKind::LocalGD), 39.0,
           0.0);
}

void counterexample_suite(Suite& s) {
  const std::vector<Vector> g{Vector::Unit(2, 1), Vector::Unit(2, 0), -Vector::Unit(2, 1), -Vector::Unit(2, 0)};
  const Partition blocks{{0, 2}, {1, 3}};
  s.equals("sampling", "fixed example: sigma^2_SS", sigma_star_as(build_distribution(scheme::Stratified{blocks}, 4), g),
           0.5, 1e-15);
  s.equals("sampling", "fixed example: sigma^2_NICE(2)", sigma_star_as(build_distribution(scheme::Nice{2}, 4), g),
           1.0 / 3.0, 1e-15);
  s.equals("sampling", "fixed example: sigma^2_BS",
           sigma_star_as(build_distribution(scheme::Block{blocks, {0.5, 0.5}}, 4), g), 0.0, 1e-15);

  Worst vs_nice, mean;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto gg = centered_grads(seed, 9, 2);
    const auto r = optimal_ss_clustering(gg, 3);
    const double nice = sigma_star_as(build_distribution(scheme::Nice{3}, 9), gg);
    vs_nice.update(r.sigma_sq - nice * (1 + 1e-12), seed);
    mean.update(rel(r.mean_sigma_sq, nice), seed);
  }
  s.at_most("sampling", "optimal SS clustering <= sigma^2_NICE (n=9, b=3)", vs_nice, 0.0);
  s.at_most("sampling", "mean sigma^2_SS over clusterings = sigma^2_NICE", mean, 1e-10);
}

void monte_carlo_suite(Suite& s) {
  const int n = 8, d = 5, seeds = 500;
  const auto clients = make_quadratic_objectives(synthetic_quadratic(n, d, 7, 1.0));
  const auto xs = solve_xstar(clients);
  const auto g = client_gradients(clients, xs.x);
  const auto mu = client_mus(clients);
  const double r0 = xs.x.squaredNorm();

  Worst excess, cap;
  for (double gamma : {0.1, 1.0, 10.0}) {
    RunConfig cfg;
    cfg.kind = AlgorithmKind::SppmAs;
    cfg.gamma = gamma;
    cfg.sampling = scheme::Nice{2};
    cfg.T = 20;
    const auto c = sampling_constants(cfg.sampling, mu, g);
    const auto curve = monte_carlo_sq_dist(cfg, clients, xs.x, seeds);
    for (long t = 0; t <= cfg.T; ++t) {
      const auto k = static_cast<std::size_t>(t);
      excess.update(curve.mean[k] - theorem1_bound(gamma, c.mu_as, c.sigma_star_sq, r0, static_cast<double>(t)) -
                    3.0 * curve.std_error[k],
                  static_cast<std::uint64_t>(gamma * 10));
    }
    cap.update(curve.mean.back() - c.sigma_star_sq / (c.mu_as * c.mu_as) - 3.0 * curve.std_error.back(),
               static_cast<std::uint64_t>(gamma * 10));
  }
  s.at_most("algorithms", "SPPM-AS mean sq dist - (bound + 3 SE), t<=20", excess, 0.0);
  s.at_most("algorithms", "SPPM-AS t=20 mean - (sigma^2/mu^2 + 3 SE)", cap, 0.0);

  RunConfig fp;
  fp.kind = AlgorithmKind::FedProxSppmAs;
  fp.gamma = 1.0;
  fp.sampling = scheme::Nice{1};
  fp.T = 20;
  const auto consts = fedprox_constants(build_distribution(fp.sampling, n), mu, g, fp.gamma);
  const auto curve = monte_carlo_sq_dist(fp, clients, xs.x, seeds);
  Worst fed;
  for (long t = 0; t <= fp.T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    fed.update(curve.mean[k] - consts.bound(r0, static_cast<double>(t)) - 3.0 * curve.std_error[k], 0);
  }
  s.at_most("algorithms", "FedProx-SPPM-AS mean - (A^t R0^2 + B/(1-A) + 3 SE)", fed, 0.0);
}

}  // namespace

VerifyReport run_verify(VerifyLevel level, const VerifyHooks& hooks) {
  VerifyReport report;
  Suite s(report);
  sampling_suite(s, hooks);
  objectives_suite(s);
  theory_suite(s);
  prox_suite(s);
  cost_suite(s);
  if (level == VerifyLevel::Full) {
    counterexample_suite(s);
    monte_carlo_suite(s);
  }
  return report;
}

void print_verify_table(std::ostream& out, const VerifyReport& report) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-13s %-60s %14s %14s  %s\n", "module", "quantity", "empirical", "bound",
                "result");
  out << buf;
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof buf, "%-13s %-60s %14.6g %14.6g  %s", c.module.c_str(), c.property.c_str(),
                  c.empirical, c.bound, c.pass ? "pass" : "FAIL");
    out << buf;
    if (!c.pass) out << " (seed " << c.seed << ")";
    out << '\n';
  }
}

}  // namespace sppm
