#include "sppm/errors.hpp"
#include "sppm/theory.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace sppm {
namespace {

using testing::Gen;

TEST(ConvergenceBound, Examples) {
  EXPECT_DOUBLE_EQ(sppm_neighborhood(1.0, 1.0, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(theorem1_bound(1.0, 1.0, 3.0, 4.0, 0.0), 5.0);
  EXPECT_DOUBLE_EQ(theorem1_bound(1.0, 1.0, 3.0, 4.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(theorem1_bound(1.0, 1.0, 0.0, 1.0, 2.0), 1.0 / 16);
  EXPECT_THROW(theorem1_bound(0.0, 1.0, 1.0, 1.0, 1.0), ArgumentError);
  EXPECT_THROW(theorem1_bound(1.0, 0.0, 1.0, 1.0, 1.0), ArgumentError);
}

TEST(ConvergenceBound, DecreasesInTimeTowardTheNeighborhood) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Gen gen(seed);
    const double g = gen.uniform(0.01, 100), m = gen.uniform(0.01, 3), s = gen.uniform(0, 10),
                 r = gen.uniform(0, 10);
    double prev = INFINITY;
    for (int t = 0; t < 50; ++t) {
      const double b = theorem1_bound(g, m, s, r, t);
      EXPECT_LE(b, prev);
      EXPECT_GE(b, sppm_neighborhood(g, m, s));
      prev = b;
    }
    // Larger stepsizes widen the neighborhood.
    EXPECT_LE(sppm_neighborhood(g, m, s), sppm_neighborhood(2 * g, m, s) * (1 + 1e-15));
    EXPECT_LE(sppm_neighborhood(g, m, s), s / m / m);
  }
}

TEST(IterationComplexity, Example) {
  const auto c = iteration_complexity(0.01, 1.0, 1.0, 1.0);
  ASSERT_TRUE(c.gamma.has_value());
  EXPECT_DOUBLE_EQ(*c.gamma, 0.01);
  // (50 + 1/2) log 200 = 267.57
  EXPECT_EQ(c.t_min, 268);
}

TEST(IterationComplexity, ZeroVarianceHasNoStepsizeConstraint) {
  const auto c = iteration_complexity(1e-4, 0.5, 0.0, 2.0);
  EXPECT_FALSE(c.gamma.has_value());
  EXPECT_EQ(c.t_min, static_cast<std::int64_t>(std::ceil(0.5 * std::log(4e4))));
  EXPECT_EQ(iteration_complexity(10.0, 1.0, 1.0, 1.0).t_min, 0);
}

TEST(IterationComplexity, PrescribedPairMeetsTheTarget) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Gen gen(seed);
    const double eps = std::exp(gen.uniform(-9, 0)), mu = gen.uniform(0.01, 5),
                 sigma = std::exp(gen.uniform(-5, 3)), r0 = std::exp(gen.uniform(-3, 4));
    const auto c = iteration_complexity(eps, mu, sigma, r0);
    ASSERT_TRUE(c.gamma.has_value());
    EXPECT_LE(theorem1_bound(*c.gamma, mu, sigma, r0, static_cast<double>(c.t_min)), eps * (1 + 1e-12))
        << "seed " << seed;
  }
}

TEST(InexactBound, ReducesToExactBoundAsAccuracyImproves) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Gen gen(seed);
    const double g = gen.uniform(0.1, 10), m = gen.uniform(0.1, 2), s = gen.uniform(0, 5),
                 r = gen.uniform(0, 5), t = gen.integer(0, 20);
    const double exact = theorem1_bound(g, m, s, r, t);
    EXPECT_LE(testing::rel_err(inexact_bound(g, m, s, 0.0, 1e-13, r, t), exact), 1e-9);
    // Any positive slack or oracle error can only loosen it.
    const double sd = default_inexact_s(g, m);
    EXPECT_GE(inexact_bound(g, m, s, gen.uniform(0, 1), sd, r, t), exact * (1 - 1e-12));
  }
}

TEST(InexactBound, Examples) {
  // gamma = mu = 1, s = 1: rate 2/4, floor 2 (sigma^2 + 4 b) / 2.
  EXPECT_DOUBLE_EQ(inexact_bound(1, 1, 1, 0.25, 1, 8, 2), 0.25 * 8 + 2.0);
  EXPECT_DOUBLE_EQ(default_inexact_s(2.0, 0.5), 1.0);
  EXPECT_THROW(inexact_bound(1, 1, 1, 0, 3, 1, 1), ArgumentError);
  EXPECT_THROW(inexact_bound(1, 1, 1, 0, 0, 1, 1), ArgumentError);
  EXPECT_THROW(inexact_bound(1, 1, 1, -1, 1, 1, 1), ArgumentError);
}

TEST(FedProxConstants, MatchDefinitionOverBruteForceLaw) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Gen gen(seed);
    const int n = gen.integer(1, 6);
    const auto mu = gen.positive(n);
    const auto g = gen.centered(n, 2);
    const double gamma = gen.uniform(0.1, 10);
    const SamplingScheme s = scheme::Nice{gen.integer(1, n)};
    const auto c = fedprox_constants(build_distribution(s, n), mu, g, gamma);
    double a = 0.0, b = 0.0;
    for (const auto& [cohort, p] : testing::brute_force_law(s, n)) {
      double sa = 0.0, sb = 0.0;
      for (int i : cohort) {
        const auto k = static_cast<std::size_t>(i);
        sa += 1.0 / (1.0 + gamma * mu[k]);
        sb += gamma * g[k].squaredNorm() / ((1.0 + gamma * mu[k]) * mu[k]);
      }
      a += p * sa / cohort.size();
      b += p * sb / cohort.size();
    }
    EXPECT_LE(testing::rel_err(c.A, a), 1e-13);
    EXPECT_LE(testing::rel_err(c.B, b), 1e-13);
    EXPECT_LT(c.A, 1.0);
    EXPECT_DOUBLE_EQ(c.bound(2.0, 0.0), 2.0 + c.B / (1.0 - c.A));
  }
}

TEST(FedProxConstants, SingleClient) {
  const std::vector<double> mu{2.0};
  const std::vector<Vector> g{Vector::Constant(1, 3.0)};
  const auto c = fedprox_constants(build_distribution(scheme::Full{}, 1), mu, g, 0.5);
  EXPECT_DOUBLE_EQ(c.A, 0.5);
  EXPECT_DOUBLE_EQ(c.B, 0.5 * 9.0 * 0.5 / 2.0);
}

TEST(SolveXstar, QuadraticsMatchNormalEquations) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Gen gen(seed);
    const int n = gen.integer(1, 6), d = gen.integer(1, 6);
    std::vector<QuadraticSpec> specs;
    Matrix a = Matrix::Zero(d, d);
    Vector b = Vector::Zero(d);
    for (int i = 0; i < n; ++i) {
      specs.push_back(testing::random_quadratic(gen, d));
      a += specs.back().A;
      b += specs.back().b;
    }
    const auto xs = solve_xstar(make_quadratic_objectives(specs));
    const Vector ref = a.colPivHouseholderQr().solve(b);
    EXPECT_LE((xs.x - ref).norm(), 1e-10 * std::max(1.0, ref.norm()));
  }
}

TEST(SolveXstar, LogisticStationarity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Gen gen(seed);
    const auto clients = testing::random_logistics(gen, 5, 4, 0.01);
    const auto xs = solve_xstar(clients);
    EXPECT_LE(xs.grad_norm, 1e-12);
    const auto g = client_gradients(clients, xs.x);
    Vector sum = Vector::Zero(4);
    for (const auto& v : g) sum += v / 5.0;
    EXPECT_LE(sum.norm(), 1e-12);
    EXPECT_EQ(client_mus(clients), std::vector<double>(5, 0.01));
  }
}

}  // namespace
}  // namespace sppm
