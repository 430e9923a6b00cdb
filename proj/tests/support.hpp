#pragma once

#include "sppm/objectives.hpp"
#include "sppm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <vector>

namespace sppm::testing {

// Generators are seeded std::mt19937_64 streams, independent of the
// library's counter RNG so oracles do not share code with the subject.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal() { return std::normal_distribution<double>()(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }

  Vector vector(int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  std::vector<Vector> centered(int n, int d) {
    std::vector<Vector> g;
    Vector mean = Vector::Zero(d);
    for (int i = 0; i < n; ++i) {
      g.push_back(vector(d));
      mean += g.back();
    }
    for (auto& v : g) v -= mean / n;
    return g;
  }

  std::vector<double> positive(int n, double lo = 0.05, double hi = 3.0) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  std::vector<double> simplex(int n) {
    auto v = positive(n, 0.1, 1.0);
    double s = 0.0;
    for (double x : v) s += x;
    for (auto& x : v) x /= s;
    return v;
  }

  /// Random partition of 0..n-1 into b nonempty blocks.
  Partition partition(int n, int b) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), eng_);
    Partition p(static_cast<std::size_t>(b));
    for (int j = 0; j < b; ++j) p[static_cast<std::size_t>(j)].push_back(perm[static_cast<std::size_t>(j)]);
    for (int i = b; i < n; ++i) p[static_cast<std::size_t>(integer(0, b - 1))].push_back(perm[static_cast<std::size_t>(i)]);
    return p;
  }

  /// Random SPD matrix with eigenvalues in [lo, hi].
  Matrix spd(int d, double lo, double hi) {
    Matrix q = Eigen::HouseholderQR<Matrix>(Matrix::NullaryExpr(d, d, [this] { return normal(); }))
                   .householderQ();
    Vector ev(d);
    for (int i = 0; i < d; ++i) ev[i] = uniform(lo, hi);
    return q * ev.asDiagonal() * q.transpose();
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// A law over cohorts written out by brute force: bitmask -> probability.
using Law = std::map<std::vector<int>, double>;

inline std::vector<int> members(unsigned mask, int n) {
  std::vector<int> c;
  for (int i = 0; i < n; ++i)
    if (mask & (1u << i)) c.push_back(i);
  return c;
}

/// Every scheme's law from its textbook definition, enumerating all 2^n
/// subsets (n <= 12).
inline Law brute_force_law(const SamplingScheme& s, int n) {
  Law law;
  if (const auto* x = std::get_if<scheme::Full>(&s)) {
    (void)x;
    law[members((1u << n) - 1, n)] = 1.0;
  } else if (const auto* x = std::get_if<scheme::Nonuniform>(&s)) {
    for (int i = 0; i < n; ++i) law[{i}] = x->p[static_cast<std::size_t>(i)];
  } else if (const auto* x = std::get_if<scheme::Importance>(&s)) {
    double total = 0.0;
    for (double m : x->mu) total += m;
    for (int i = 0; i < n; ++i) law[{i}] = x->mu[static_cast<std::size_t>(i)] / total;
  } else if (const auto* x = std::get_if<scheme::Nice>(&s)) {
    int count = 0;
    for (unsigned m = 0; m < (1u << n); ++m)
      if (__builtin_popcount(m) == x->tau) ++count;
    for (unsigned m = 0; m < (1u << n); ++m)
      if (__builtin_popcount(m) == x->tau) law[members(m, n)] = 1.0 / count;
  } else if (const auto* x = std::get_if<scheme::Block>(&s)) {
    for (std::size_t j = 0; j < x->blocks.size(); ++j) {
      unsigned m = 0;
      for (int i : x->blocks[j]) m |= 1u << i;
      law[members(m, n)] = x->q[j];
    }
  } else if (const auto* x = std::get_if<scheme::Stratified>(&s)) {
    // A subset is in the support iff it meets every block exactly once.
    for (unsigned m = 1; m < (1u << n); ++m) {
      bool ok = true;
      double p = 1.0;
      for (const auto& b : x->blocks) {
        int hits = 0;
        for (int i : b) hits += (m >> i) & 1u;
        ok = ok && hits == 1;
        p /= static_cast<double>(b.size());
      }
      if (ok) law[members(m, n)] = p;
    }
  }
  return law;
}

inline std::vector<double> law_marginals(const Law& law, int n) {
  std::vector<double> p(static_cast<std::size_t>(n), 0.0);
  for (const auto& [c, pc] : law)
    for (int i : c) p[static_cast<std::size_t>(i)] += pc;
  return p;
}

/// mu_AS and sigma^2 straight from the definitions over a brute-force law.
inline std::pair<double, double> law_constants(const Law& law, int n, const std::vector<double>& mu,
                                               const std::vector<Vector>& g) {
  const auto p = law_marginals(law, n);
  double mu_min = INFINITY, sigma = 0.0;
  for (const auto& [c, pc] : law) {
    double m = 0.0;
    Vector v = Vector::Zero(g.front().size());
    for (int i : c) {
      m += mu[static_cast<std::size_t>(i)] / (n * p[static_cast<std::size_t>(i)]);
      v += g[static_cast<std::size_t>(i)] / (n * p[static_cast<std::size_t>(i)]);
    }
    mu_min = std::min(mu_min, m);
    sigma += pc * v.squaredNorm();
  }
  return {mu_min, sigma};
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline QuadraticSpec random_quadratic(Gen& gen, int d, double lo = 0.2, double hi = 3.0) {
  return {gen.spd(d, lo, hi), gen.vector(d), 0.0};
}

inline ObjectiveSet random_quadratics(Gen& gen, int n, int d, double lo = 0.2, double hi = 3.0) {
  std::vector<QuadraticSpec> specs;
  for (int i = 0; i < n; ++i) specs.push_back(random_quadratic(gen, d, lo, hi));
  return make_quadratic_objectives(specs);
}

inline ClientShard random_shard(Gen& gen, int n, int d, double scale = 1.0) {
  ClientShard s;
  for (int j = 0; j < n; ++j) {
    DataPoint p;
    p.label = gen.integer(0, 1) ? 1 : -1;
    for (int k = 0; k < d; ++k)
      if (gen.uniform() < 0.7) p.features.push_back({static_cast<std::uint32_t>(k), scale * gen.normal()});
    s.points.push_back(p);
  }
  return s;
}

inline ObjectiveSet random_logistics(Gen& gen, int n, int d, double mu, int points = 12) {
  ObjectiveSet out;
  for (int i = 0; i < n; ++i)
    out.push_back(std::make_shared<LogisticObjective>(random_shard(gen, points, d), static_cast<std::size_t>(d), mu));
  return out;
}

}  // namespace sppm::testing
