#include "sppm/cost_model.hpp"
#include "sppm/errors.hpp"
#include "sppm/theory.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace sppm {
namespace {

using testing::Gen;

TEST(TotalCost, Examples) {
  EXPECT_DOUBLE_EQ(total_cost(10, 3, {0.1, 1.0}, CostKind::Prox), 13.0);
  EXPECT_DOUBLE_EQ(total_cost(10, 3, CostParams::flat(), CostKind::Prox), 30.0);
  EXPECT_DOUBLE_EQ(total_cost(10, 3, {0.1, 1.0}, CostKind::LocalGD), 11.0);
  EXPECT_DOUBLE_EQ(total_cost(7, 1, CostParams::flat(), CostKind::LocalGD), 7.0);
  EXPECT_THROW(total_cost(0, 1, CostParams::flat(), CostKind::Prox), ArgumentError);
  EXPECT_THROW(total_cost(1, 1, {0.0, 0.0}, CostKind::Prox), ArgumentError);
  EXPECT_THROW(total_cost(1, 1, {-1.0, 1.0}, CostKind::Prox), ArgumentError);
}

TEST(TotalCost, LinearInTAndAffineInK) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Gen gen(seed);
    const CostParams p{gen.uniform(0, 2), gen.uniform(0.01, 2)};
    const long t = gen.integer(1, 1000), k = gen.integer(1, 50);
    const double c = total_cost(t, k, p, CostKind::Prox);
    EXPECT_DOUBLE_EQ(total_cost(2 * t, k, p, CostKind::Prox), 2 * c);
    EXPECT_NEAR(total_cost(t, k + 1, p, CostKind::Prox) - c, p.c1 * t, 1e-9 * c);
    EXPECT_DOUBLE_EQ(total_cost(t, k, p, CostKind::LocalGD), total_cost(t, 1, p, CostKind::Prox));
  }
}

SweepResult handmade() {
  SweepResult r;
  r.epsilon = 0.01;
  r.cells = {{1.0, 1, 40, 40}, {1.0, 2, 20, 20}, {1.0, 4, 10, 11},
             {10.0, 1, std::nullopt, std::nullopt}, {10.0, 3, 5, 5},
             {100.0, 1, std::nullopt, std::nullopt}};
  r.baseline = {{0.1, 5, 100, 100}, {0.01, 5, std::nullopt, std::nullopt}};
  return r;
}

TEST(SweepResult, OptimaUnderFlatCost) {
  const auto r = handmade();
  const auto opt = r.per_gamma_optima(CostParams::flat());
  ASSERT_EQ(opt.size(), 2u);
  // gamma = 1: costs 40, 40, 40; ties keep the smallest K.
  EXPECT_EQ(opt[0].k, 1);
  EXPECT_DOUBLE_EQ(opt[0].cost, 40.0);
  EXPECT_EQ(opt[1].k, 3);
  EXPECT_DOUBLE_EQ(opt[1].cost, 15.0);
  EXPECT_DOUBLE_EQ(r.best(CostParams::flat())->gamma, 10.0);
  EXPECT_DOUBLE_EQ(r.baseline_best(CostParams::flat())->cost, 100.0);
  EXPECT_DOUBLE_EQ(*r.reduction_vs_localgd(CostParams::flat()), 0.85);
}

TEST(SweepResult, HierarchicalCostFavoursLargerK) {
  const auto r = handmade();
  const CostParams p{0.1, 1.0};
  const auto opt = r.per_gamma_optima(p);
  // gamma = 1: 40 * 1.1 = 44, 20 * 1.2 = 24, 10 * 1.4 = 14.
  EXPECT_EQ(opt[0].k, 4);
  EXPECT_DOUBLE_EQ(opt[0].cost, 14.0);
  EXPECT_DOUBLE_EQ(opt[1].cost, 6.5);
  EXPECT_DOUBLE_EQ(*r.reduction_vs_localgd(p), 1.0 - 6.5 / 110.0);
}

TEST(SweepResult, NothingReachable) {
  SweepResult r;
  r.cells = {{1.0, 1, std::nullopt, std::nullopt}};
  EXPECT_TRUE(r.per_gamma_optima(CostParams::flat()).empty());
  EXPECT_FALSE(r.best(CostParams::flat()));
  EXPECT_FALSE(r.reduction_vs_localgd(CostParams::flat()));
  const auto j = sweep_summary(r, CostParams::flat());
  EXPECT_TRUE(j["best"].is_null());
  EXPECT_TRUE(j["reduction_vs_localgd_percent"].is_null());
}

TEST(SweepWriters, CsvGnuplotAndSummary) {
  const auto r = handmade();
  std::ostringstream csv, lgd, plot;
  write_sweep_csv(csv, r, CostParams::flat());
  EXPECT_EQ(csv.str(),
            "gamma,K,T_eps,total_cost,reached\n"
            "1,1,40,40,1\n1,2,20,40,1\n1,4,10,40,1\n10,1,,,0\n10,3,5,15,1\n100,1,,,0\n");
  write_localgd_csv(lgd, r, CostParams::flat());
  EXPECT_EQ(lgd.str(),
            "kind,alpha,local_steps,T_eps,total_cost,reached\n"
            "localgd,0.10000000000000001,5,100,100,1\nlocalgd,0.01,5,,,0\n");
  write_sweep_gnuplot(plot, r, CostParams::flat());
  const auto text = plot.str();
  EXPECT_NE(text.find("# gamma=1\n# K total_cost\n1 40\n2 40\n4 40\n"), std::string::npos);
  EXPECT_NE(text.find("\n\n\n# gamma=10\n"), std::string::npos);
  EXPECT_NE(text.find("# localgd best"), std::string::npos);
  EXPECT_NE(text.find("1 100\n4 100\n"), std::string::npos);

  const auto j = sweep_summary(r, CostParams::flat());
  EXPECT_DOUBLE_EQ(j["reduction_vs_localgd_percent"].get<double>(), 85.0);
  EXPECT_EQ(j["per_gamma"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["per_gamma"][0]["reduction_vs_localgd_percent"].get<double>(), 60.0);
  EXPECT_EQ(j["localgd"]["kind"], "localgd");
  EXPECT_DOUBLE_EQ(j["reduction_vs_localgd_percent_by_model"]["hierarchical"].get<double>(),
                   100.0 * (1.0 - 6.5 / 110.0));
}

struct Fixture {
  ObjectiveSet clients;
  Vector xstar;
};

Fixture small_problem() {
  Gen gen(21);
  Fixture f{testing::random_quadratics(gen, 6, 2), {}};
  f.xstar = solve_xstar(f.clients).x;
  return f;
}

TEST(FirstHit, SingleSeedMatchesStopReport) {
  const auto f = small_problem();
  RunConfig cfg;
  cfg.gamma = 2.0;
  cfg.sampling = scheme::Nice{2};
  cfg.x0 = Vector::Constant(2, 3.0);
  cfg.seed = 5;
  cfg.T = 300;
  const double eps = 1e-3;
  const auto hit = first_hit(cfg, 1, cfg.T, eps, f.clients, f.xstar);
  const auto stop = stop_report(run_algorithm(cfg, f.clients, f.xstar), eps);
  EXPECT_EQ(hit.t_median, stop.t_eps);
  EXPECT_EQ(hit.t_mean, stop.t_eps);
}

TEST(FirstHit, MedianOfThreeSeeds) {
  const auto f = small_problem();
  RunConfig cfg;
  cfg.gamma = 1.0;
  cfg.sampling = scheme::Nice{3};
  cfg.x0 = Vector::Constant(2, 3.0);
  cfg.T = 200;
  const double eps = 1e-2;
  std::vector<Trajectory> trajs;
  for (std::uint64_t s = 0; s < 3; ++s) {
    cfg.seed = s;
    trajs.push_back(run_algorithm(cfg, f.clients, f.xstar));
  }
  std::optional<long> expect;
  for (long t = 1; t <= cfg.T && !expect; ++t) {
    std::vector<double> v;
    for (const auto& tr : trajs) v.push_back(tr[static_cast<std::size_t>(t)].sq_dist);
    std::sort(v.begin(), v.end());
    if (v[1] <= eps) expect = t;
  }
  cfg.seed = 0;
  EXPECT_EQ(first_hit(cfg, 3, cfg.T, eps, f.clients, f.xstar).t_median, expect);
}

TEST(FirstHit, DivergedSeedsNeverReach) {
  const auto f = small_problem();
  RunConfig cfg;
  cfg.kind = AlgorithmKind::LocalGD;
  cfg.alpha = 10.0 / f.clients[0]->smoothness();
  cfg.x0 = Vector::Ones(2);
  const auto hit = first_hit(cfg, 3, 500, 1e-3, f.clients, f.xstar);
  EXPECT_FALSE(hit.t_median);
  EXPECT_FALSE(hit.t_mean);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  const auto f = small_problem();
  SweepSpec spec;
  spec.base.sampling = scheme::Nice{2};
  spec.base.solver.kind = SolverKind::GD;
  spec.base.solver.rounds = 1;
  spec.base.x0 = Vector::Constant(2, 2.0);
  spec.gammas = {10.0, 1.0, 1.0};
  spec.ks = {3, 1};
  spec.epsilon = 1e-2;
  spec.n_seeds = 3;
  spec.t_max = 200;
  spec.localgd_base = spec.base;
  spec.localgd_alphas = {0.05};
  spec.localgd_steps = {2};
  const auto a = sweep(spec, f.clients, f.xstar);
  spec.jobs = 3;
  const auto b = sweep(spec, f.clients, f.xstar);
  ASSERT_EQ(a.cells.size(), 4u);
  EXPECT_EQ(a.cells[0].gamma, 1.0);
  EXPECT_EQ(a.cells[0].k, 1);
  EXPECT_EQ(a.cells[3].k, 3);
  std::ostringstream x, y;
  write_sweep_csv(x, a, CostParams::flat());
  write_sweep_csv(y, b, CostParams::flat());
  EXPECT_EQ(x.str(), y.str());
  EXPECT_EQ(a.baseline[0].t_eps, b.baseline[0].t_eps);
}

TEST(Sweep, RejectsBaselineBaseRun) {
  const auto f = small_problem();
  SweepSpec spec;
  spec.base.kind = AlgorithmKind::LocalGD;
  spec.gammas = {1.0};
  spec.ks = {1};
  EXPECT_THROW(sweep(spec, f.clients, f.xstar), ArgumentError);
}

}  // namespace
}  // namespace sppm
