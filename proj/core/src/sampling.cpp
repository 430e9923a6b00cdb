#include "sppm/sampling.hpp"

#include "sppm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sppm {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Neumaier-compensated sum; C(n, tau) equal terms would otherwise drift
// past the probability tolerance.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated(std::span<const double> v) {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value();
}

void check_partition(const Partition& blocks, int n, const char* what) {
  if (blocks.empty()) throw ArgumentError(std::string(what) + ": partition has no blocks");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::size_t covered = 0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (blocks[j].empty())
      throw ArgumentError(std::string(what) + ": block " + std::to_string(j) + " is empty");
    for (int i : blocks[j]) {
      if (i < 0 || i >= n)
        throw ArgumentError(std::string(what) + ": client " + std::to_string(i) + " out of range");
      if (seen[static_cast<std::size_t>(i)])
        throw ArgumentError(std::string(what) + ": client " + std::to_string(i) +
                            " appears in more than one block");
      seen[static_cast<std::size_t>(i)] = 1;
      ++covered;
    }
  }
  if (covered != static_cast<std::size_t>(n))
    throw ArgumentError(std::string(what) + ": partition does not cover all clients");
}

void check_probabilities(std::span<const double> p, std::size_t expected, const char* what) {
  if (p.size() != expected)
    throw ArgumentError(std::string(what) + ": expected " + std::to_string(expected) +
                        " probabilities, got " + std::to_string(p.size()));
  for (double v : p)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ArgumentError(std::string(what) + ": probabilities must be positive");
  if (std::abs(compensated(p) - 1.0) > kProbabilityTol)
    throw ArgumentError(std::string(what) + ": probabilities do not sum to 1");
}

std::vector<double> importance_p(const std::vector<double>& mu) {
  const double total = compensated(mu);
  std::vector<double> p(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) p[i] = mu[i] / total;
  return p;
}

double binomial(int n, int k) {
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

std::vector<int> sorted_block(std::vector<int> b) {
  std::sort(b.begin(), b.end());
  return b;
}

std::size_t pick_cumulative(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                               cumulative.size() - 1);
}

std::vector<double> prefix_sums(std::span<const double> p) {
  std::vector<double> c(p.size());
  CompensatedSum s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s.add(p[i]);
    c[i] = s.value();
  }
  return c;
}

}  // namespace

std::string scheme_name(const SamplingScheme& s) {
  return std::visit(overloaded{
                        [](const scheme::Full&) { return "full"; },
                        [](const scheme::Nonuniform&) { return "nonuniform"; },
                        [](const scheme::Importance&) { return "importance"; },
                        [](const scheme::Nice&) { return "nice"; },
                        [](const scheme::Block&) { return "block"; },
                        [](const scheme::Stratified&) { return "stratified"; },
                    },
                    s);
}

void validate_scheme(const SamplingScheme& s, int n) {
  if (n < 1) throw ArgumentError("sampling needs at least one client");
  std::visit(overloaded{
                 [](const scheme::Full&) {},
                 [n](const scheme::Nonuniform& x) {
                   check_probabilities(x.p, static_cast<std::size_t>(n), "nonuniform");
                 },
                 [n](const scheme::Importance& x) {
                   if (x.mu.size() != static_cast<std::size_t>(n))
                     throw ArgumentError("importance: expected " + std::to_string(n) + " mu values");
                   for (double m : x.mu)
                     if (!(m > 0.0) || !std::isfinite(m))
                       throw ArgumentError("importance: mu values must be positive");
                 },
                 [n](const scheme::Nice& x) {
                   if (x.tau < 1 || x.tau > n)
                     throw ArgumentError("nice: tau must lie in 1.." + std::to_string(n));
                 },
                 [n](const scheme::Block& x) {
                   check_partition(x.blocks, n, "block");
                   check_probabilities(x.q, x.blocks.size(), "block");
                 },
                 [n](const scheme::Stratified& x) { check_partition(x.blocks, n, "stratified"); },
             },
             s);
}

std::vector<double> marginals_of(const SamplingScheme& s, int n) {
  validate_scheme(s, n);
  const auto un = static_cast<std::size_t>(n);
  return std::visit(overloaded{
                        [un](const scheme::Full&) { return std::vector<double>(un, 1.0); },
                        [](const scheme::Nonuniform& x) { return x.p; },
                        [](const scheme::Importance& x) { return importance_p(x.mu); },
                        [un, n](const scheme::Nice& x) {
                          return std::vector<double>(un, static_cast<double>(x.tau) / n);
                        },
                        [un](const scheme::Block& x) {
                          std::vector<double> p(un);
                          for (std::size_t j = 0; j < x.blocks.size(); ++j)
                            for (int i : x.blocks[j]) p[static_cast<std::size_t>(i)] = x.q[j];
                          return p;
                        },
                        [un](const scheme::Stratified& x) {
                          std::vector<double> p(un);
                          for (const auto& b : x.blocks)
                            for (int i : b)
                              p[static_cast<std::size_t>(i)] = 1.0 / static_cast<double>(b.size());
                          return p;
                        },
                    },
                    s);
}

SamplingDistribution::SamplingDistribution(int n, std::vector<Atom> support)
    : n_(n), support_(std::move(support)) {
  if (n < 1) throw ArgumentError("sampling distribution needs n >= 1");
  if (support_.empty()) throw ArgumentError("sampling distribution has empty support");
  std::vector<CompensatedSum> marg(static_cast<std::size_t>(n));
  CompensatedSum total;
  cumulative_.reserve(support_.size());
  for (const auto& a : support_) {
    if (a.cohort.empty()) throw ArgumentError("sampling is vacuous: empty cohort in support");
    if (!(a.probability > 0.0)) throw ArgumentError("support atoms need positive probability");
    if (!std::is_sorted(a.cohort.begin(), a.cohort.end()) ||
        std::adjacent_find(a.cohort.begin(), a.cohort.end()) != a.cohort.end())
      throw ArgumentError("cohort indices must be sorted and distinct");
    for (int i : a.cohort) {
      if (i < 0 || i >= n) throw ArgumentError("cohort index out of range");
      marg[static_cast<std::size_t>(i)].add(a.probability);
    }
    total.add(a.probability);
    cumulative_.push_back(total.value());
  }
  if (std::abs(total.value() - 1.0) > kProbabilityTol)
    throw ArgumentError("support probabilities do not sum to 1");
  marginals_.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < marginals_.size(); ++i) {
    marginals_[i] = marg[i].value();
    if (!(marginals_[i] > 0.0))
      throw ArgumentError("sampling is not proper: client " + std::to_string(i) +
                          " is never selected");
  }
}

Cohort SamplingDistribution::cohort(std::size_t atom) const {
  Cohort c;
  c.indices = support_.at(atom).cohort;
  c.weights.reserve(c.indices.size());
  for (int i : c.indices) c.weights.push_back(1.0 / (n_ * marginals_[static_cast<std::size_t>(i)]));
  return c;
}

Cohort draw(const SamplingDistribution& dist, CounterRng& rng) {
  return dist.cohort(pick_cumulative(dist.cumulative_, rng.uniform()));
}

double support_size(const SamplingScheme& s, int n) {
  return std::visit(overloaded{
                        [](const scheme::Full&) { return 1.0; },
                        [n](const scheme::Nonuniform&) { return static_cast<double>(n); },
                        [n](const scheme::Importance&) { return static_cast<double>(n); },
                        [n](const scheme::Nice& x) { return binomial(n, x.tau); },
                        [](const scheme::Block& x) { return static_cast<double>(x.blocks.size()); },
                        [](const scheme::Stratified& x) {
                          double r = 1.0;
                          for (const auto& b : x.blocks) r *= static_cast<double>(b.size());
                          return r;
                        },
                    },
                    s);
}

SamplingDistribution build_distribution(const SamplingScheme& s, int n, double cap) {
  validate_scheme(s, n);
  const double size = support_size(s, n);
  if (size > cap) throw CapExceeded(size, cap);

  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(size));
  std::visit(
      overloaded{
          [&](const scheme::Full&) {
            std::vector<int> all(static_cast<std::size_t>(n));
            std::iota(all.begin(), all.end(), 0);
            atoms.push_back({std::move(all), 1.0});
          },
          [&](const scheme::Nonuniform& x) {
            for (int i = 0; i < n; ++i) atoms.push_back({{i}, x.p[static_cast<std::size_t>(i)]});
          },
          [&](const scheme::Importance& x) {
            const auto p = importance_p(x.mu);
            for (int i = 0; i < n; ++i) atoms.push_back({{i}, p[static_cast<std::size_t>(i)]});
          },
          [&](const scheme::Nice& x) {
            const double p = 1.0 / size;
            std::vector<int> c(static_cast<std::size_t>(x.tau));
            std::iota(c.begin(), c.end(), 0);
            for (;;) {
              atoms.push_back({c, p});
              int k = x.tau - 1;
              while (k >= 0 && c[static_cast<std::size_t>(k)] == n - x.tau + k) --k;
              if (k < 0) break;
              ++c[static_cast<std::size_t>(k)];
              for (int j = k + 1; j < x.tau; ++j)
                c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
            }
          },
          [&](const scheme::Block& x) {
            for (std::size_t j = 0; j < x.blocks.size(); ++j)
              atoms.push_back({sorted_block(x.blocks[j]), x.q[j]});
          },
          [&](const scheme::Stratified& x) {
            Partition blocks;
            for (const auto& b : x.blocks) blocks.push_back(sorted_block(b));
            const double p = 1.0 / size;
            std::vector<std::size_t> pos(blocks.size(), 0);
            for (;;) {
              std::vector<int> c;
              c.reserve(blocks.size());
              for (std::size_t j = 0; j < blocks.size(); ++j) c.push_back(blocks[j][pos[j]]);
              std::sort(c.begin(), c.end());
              atoms.push_back({std::move(c), p});
              std::size_t j = blocks.size();
              while (j > 0) {
                --j;
                if (++pos[j] < blocks[j].size()) break;
                pos[j] = 0;
                if (j == 0) return;
              }
            }
          },
      },
      s);
  // Stratified cross-products come out in block order; present the support
  // lexicographically like every other scheme.
  if (std::holds_alternative<scheme::Stratified>(s))
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.cohort < b.cohort; });
  return SamplingDistribution(n, std::move(atoms));
}

CohortSampler::CohortSampler(SamplingScheme s, int n)
    : scheme_(std::move(s)), n_(n), marginals_(marginals_of(scheme_, n)) {
  if (const auto* x = std::get_if<scheme::Nonuniform>(&scheme_)) cumulative_ = prefix_sums(x->p);
  if (const auto* x = std::get_if<scheme::Importance>(&scheme_))
    cumulative_ = prefix_sums(importance_p(x->mu));
  if (const auto* x = std::get_if<scheme::Block>(&scheme_)) cumulative_ = prefix_sums(x->q);
}

Cohort CohortSampler::with_weights(std::vector<int> indices) const {
  std::sort(indices.begin(), indices.end());
  Cohort c;
  c.weights.reserve(indices.size());
  for (int i : indices) c.weights.push_back(1.0 / (n_ * marginals_[static_cast<std::size_t>(i)]));
  c.indices = std::move(indices);
  return c;
}

Cohort CohortSampler::draw(CounterRng& rng) const {
  return std::visit(
      overloaded{
          [&](const scheme::Full&) {
            std::vector<int> all(static_cast<std::size_t>(n_));
            std::iota(all.begin(), all.end(), 0);
            return with_weights(std::move(all));
          },
          [&](const scheme::Nonuniform&) {
            return with_weights({static_cast<int>(pick_cumulative(cumulative_, rng.uniform()))});
          },
          [&](const scheme::Importance&) {
            return with_weights({static_cast<int>(pick_cumulative(cumulative_, rng.uniform()))});
          },
          [&](const scheme::Nice& x) {
            // Partial Fisher-Yates.
            std::vector<int> idx(static_cast<std::size_t>(n_));
            std::iota(idx.begin(), idx.end(), 0);
            for (int k = 0; k < x.tau; ++k) {
              const auto j = static_cast<std::size_t>(k) + rng.below(static_cast<std::uint64_t>(n_ - k));
              std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
            }
            idx.resize(static_cast<std::size_t>(x.tau));
            return with_weights(std::move(idx));
          },
          [&](const scheme::Block& x) {
            return with_weights(x.blocks[pick_cumulative(cumulative_, rng.uniform())]);
          },
          [&](const scheme::Stratified& x) {
            std::vector<int> c;
            c.reserve(x.blocks.size());
            for (const auto& b : x.blocks) c.push_back(b[rng.below(b.size())]);
            return with_weights(std::move(c));
          },
      },
      scheme_);
}

double mu_as(const SamplingDistribution& dist, std::span<const double> mu,
             std::vector<int>* argmin) {
  if (mu.size() != static_cast<std::size_t>(dist.n()))
    throw ArgumentError("mu_as: expected one mu per client");
  for (double m : mu)
    if (!(m > 0.0)) throw ArgumentError("mu_as: mu values must be positive");
  const auto& marg = dist.marginals();
  double best = std::numeric_limits<double>::infinity();
  const std::vector<int>* best_cohort = nullptr;
  for (const auto& a : dist.support()) {
    double v = 0.0;
    for (int i : a.cohort)
      v += mu[static_cast<std::size_t>(i)] / (dist.n() * marg[static_cast<std::size_t>(i)]);
    if (v < best || (v == best && a.cohort < *best_cohort)) {
      best = v;
      best_cohort = &a.cohort;
    }
  }
  if (argmin) *argmin = *best_cohort;
  return best;
}

double sigma_star_as(const SamplingDistribution& dist, std::span<const Vector> grads) {
  if (grads.size() != static_cast<std::size_t>(dist.n()))
    throw ArgumentError("sigma_star_as: expected one gradient per client");
  const auto& marg = dist.marginals();
  const auto d = grads.front().size();
  CompensatedSum total;
  Vector g(d);
  for (const auto& a : dist.support()) {
    g.setZero();
    for (int i : a.cohort)
      g += grads[static_cast<std::size_t>(i)] / (dist.n() * marg[static_cast<std::size_t>(i)]);
    total.add(a.probability * g.squaredNorm());
  }
  return total.value();
}

double sigma_nice_closed_form(double sigma1, int n, int tau) {
  if (n < 2 || tau < 1 || tau > n) throw ArgumentError("sigma_nice_closed_form: need 1 <= tau <= n, n >= 2");
  return (static_cast<double>(n) / tau - 1.0) / (n - 1.0) * sigma1;
}

namespace {

SamplingConstants nice_closed_form(const scheme::Nice& x, std::span<const double> mu,
                                   std::span<const Vector> grads) {
  const int n = static_cast<int>(mu.size());
  std::vector<double> sorted(mu.begin(), mu.end());
  std::partial_sort(sorted.begin(), sorted.begin() + x.tau, sorted.end());
  SamplingConstants c;
  c.method = ConstantsMethod::ClosedForm;
  c.mu_as = compensated(std::span(sorted).first(static_cast<std::size_t>(x.tau))) / x.tau;
  CompensatedSum s1;
  for (const auto& g : grads) s1.add(g.squaredNorm());
  c.sigma_star_sq = n == 1 ? 0.0 : sigma_nice_closed_form(s1.value() / n, n, x.tau);
  return c;
}

// One uniform pick per block: the weighted sum of independent picks has
// mean (1/n) sum g_i and per-block variance (|C_j|/n)^2 times the spread of
// the block's gradients.
SamplingConstants stratified_closed_form(const scheme::Stratified& x, std::span<const double> mu,
                                         std::span<const Vector> grads) {
  const auto n = static_cast<double>(mu.size());
  const auto d = grads.front().size();
  SamplingConstants c;
  c.method = ConstantsMethod::ClosedForm;
  Vector mean = Vector::Zero(d);
  for (const auto& g : grads) mean += g;
  mean /= n;
  CompensatedSum sigma, mu_sum;
  sigma.add(mean.squaredNorm());
  for (const auto& b : x.blocks) {
    const auto size = static_cast<double>(b.size());
    Vector centroid = Vector::Zero(d);
    double mu_min = std::numeric_limits<double>::infinity();
    for (int i : b) {
      centroid += grads[static_cast<std::size_t>(i)];
      mu_min = std::min(mu_min, mu[static_cast<std::size_t>(i)]);
    }
    centroid /= size;
    double spread = 0.0;
    for (int i : b) spread += (grads[static_cast<std::size_t>(i)] - centroid).squaredNorm();
    sigma.add(size * size / (n * n) * spread / size);
    mu_sum.add(size / n * mu_min);
  }
  c.sigma_star_sq = sigma.value();
  c.mu_as = mu_sum.value();
  return c;
}

}  // namespace

SamplingConstants sampling_constants(const SamplingScheme& s, std::span<const double> mu,
                                     std::span<const Vector> grads, double cap) {
  const int n = static_cast<int>(mu.size());
  if (grads.size() != mu.size()) throw ArgumentError("sampling_constants: mu/grads size mismatch");
  validate_scheme(s, n);
  if (support_size(s, n) > cap) {
    if (const auto* x = std::get_if<scheme::Nice>(&s)) return nice_closed_form(*x, mu, grads);
    if (const auto* x = std::get_if<scheme::Stratified>(&s)) return stratified_closed_form(*x, mu, grads);
  }
  const auto dist = build_distribution(s, n, cap);
  SamplingConstants c;
  c.method = ConstantsMethod::ExactEnumeration;
  c.mu_as = mu_as(dist, mu);
  c.sigma_star_sq = sigma_star_as(dist, grads);
  return c;
}

SamplingConstants monte_carlo_constants(const CohortSampler& sampler, std::span<const double> mu,
                                        std::span<const Vector> grads, int draws,
                                        std::uint64_t seed) {
  if (draws < 2) throw ArgumentError("monte_carlo_constants: need at least 2 draws");
  if (grads.size() != static_cast<std::size_t>(sampler.n()) || mu.size() != grads.size())
    throw ArgumentError("monte_carlo_constants: expected one gradient and mu per client");
  CounterRng rng(seed, 0x6d63ULL);
  const auto d = grads.front().size();
  double mean = 0.0, m2 = 0.0;
  double mu_min = std::numeric_limits<double>::infinity();
  Vector g(d);
  for (int k = 0; k < draws; ++k) {
    const auto c = sampler.draw(rng);
    g.setZero();
    double mu_c = 0.0;
    for (std::size_t j = 0; j < c.indices.size(); ++j) {
      const auto i = static_cast<std::size_t>(c.indices[j]);
      g += c.weights[j] * grads[i];
      mu_c += c.weights[j] * mu[i];
    }
    mu_min = std::min(mu_min, mu_c);
    // Welford update.
    const double v = g.squaredNorm();
    const double delta = v - mean;
    mean += delta / (k + 1);
    m2 += delta * (v - mean);
  }
  SamplingConstants c;
  c.method = ConstantsMethod::MonteCarlo;
  c.mu_as = mu_min;
  c.sigma_star_sq = mean;
  c.standard_error = std::sqrt(m2 / (draws - 1) / draws);
  return c;
}

std::vector<double> cluster_sigma_sq(const Partition& blocks, std::span<const Vector> grads) {
  std::vector<double> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (b.empty()) throw ArgumentError("cluster_sigma_sq: empty block");
    Vector centroid = Vector::Zero(grads.front().size());
    for (int i : b) centroid += grads[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(b.size());
    double worst = 0.0;
    for (int i : b) worst = std::max(worst, (grads[static_cast<std::size_t>(i)] - centroid).squaredNorm());
    out.push_back(worst);
  }
  return out;
}

SsBounds ss_variance_upper_bound(const Partition& blocks,
                                 std::span<const double> per_cluster_sigma_sq) {
  if (blocks.size() != per_cluster_sigma_sq.size())
    throw ArgumentError("ss_variance_upper_bound: one sigma^2 per block expected");
  double n = 0.0;
  for (const auto& b : blocks) n += static_cast<double>(b.size());
  const auto nb = static_cast<double>(blocks.size());
  double weighted = 0.0, worst = 0.0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto size = static_cast<double>(blocks[j].size());
    weighted += size * size * per_cluster_sigma_sq[j];
    worst = std::max(worst, per_cluster_sigma_sq[j]);
  }
  return {nb / (n * n) * weighted, nb * worst};
}

std::vector<Partition> uniform_clusterings(int n, int b) {
  if (b < 1 || n < 1 || n % b != 0)
    throw ArgumentError("uniform_clusterings: n must be a positive multiple of b");
  const int size = n / b;
  std::vector<Partition> out;
  Partition current;
  std::vector<char> used(static_cast<std::size_t>(n), 0);

  // Each new block starts with the smallest unused client, so every
  // clustering is produced once, in lexicographic order.
  auto recurse = [&](auto&& self) -> void {
    int first = 0;
    while (first < n && used[static_cast<std::size_t>(first)]) ++first;
    if (first == n) {
      out.push_back(current);
      return;
    }
    std::vector<int> block{first};
    used[static_cast<std::size_t>(first)] = 1;
    auto extend = [&](auto&& ext, int from) -> void {
      if (static_cast<int>(block.size()) == size) {
        current.push_back(block);
        self(self);
        current.pop_back();
        return;
      }
      for (int i = from; i < n; ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        used[static_cast<std::size_t>(i)] = 1;
        block.push_back(i);
        ext(ext, i + 1);
        block.pop_back();
        used[static_cast<std::size_t>(i)] = 0;
      }
    };
    extend(extend, first + 1);
    used[static_cast<std::size_t>(first)] = 0;
  };
  recurse(recurse);
  return out;
}

SsClusteringResult optimal_ss_clustering(std::span<const Vector> grads, int b) {
  const int n = static_cast<int>(grads.size());
  if (b < 1 || n != b * b)
    throw ArgumentError("optimal_ss_clustering: needs n = b*b clients");
  if (n > 12) throw CapExceeded(static_cast<double>(n), 12.0);
  const auto clusterings = uniform_clusterings(n, b);
  SsClusteringResult r;
  r.clusterings = clusterings.size();
  r.sigma_sq = std::numeric_limits<double>::infinity();
  CompensatedSum total;
  for (const auto& blocks : clusterings) {
    const auto dist = build_distribution(scheme::Stratified{blocks}, n);
    const double v = sigma_star_as(dist, grads);
    total.add(v);
    // Values equal up to rounding count as ties; the earlier (smaller)
    // clustering wins.
    if (r.blocks.empty() || v < r.sigma_sq - 1e-12 * std::max(1.0, r.sigma_sq)) {
      r.sigma_sq = v;
      r.blocks = blocks;
    }
  }
  r.mean_sigma_sq = total.value() / static_cast<double>(clusterings.size());
  return r;
}

nlohmann::json to_json(const SamplingScheme& s) {
  nlohmann::json j;
  j["type"] = scheme_name(s);
  std::visit(overloaded{
                 [](const scheme::Full&) {},
                 [&j](const scheme::Nonuniform& x) { j["p"] = x.p; },
                 [&j](const scheme::Importance& x) { j["mu"] = x.mu; },
                 [&j](const scheme::Nice& x) { j["tau"] = x.tau; },
                 [&j](const scheme::Block& x) {
                   j["partition"] = x.blocks;
                   j["q"] = x.q;
                 },
                 [&j](const scheme::Stratified& x) { j["partition"] = x.blocks; },
             },
             s);
  return j;
}

namespace {

Partition partition_field(const nlohmann::json& j, const SchemeContext& ctx) {
  if (!j.contains("partition")) throw ConfigError("sampling.partition", "required");
  const auto& p = j["partition"];
  if (p.is_string()) {
    if (p.get<std::string>() != "clusters")
      throw ConfigError("sampling.partition", "the only named partition is \"clusters\"");
    if (!ctx.clusters) throw ConfigError("sampling.partition", "dataset has no cluster metadata");
    return *ctx.clusters;
  }
  try {
    return p.get<Partition>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("sampling.partition", "expected an array of index arrays or \"clusters\"");
  }
}

std::vector<double> real_array(const nlohmann::json& j, const char* key) {
  const std::string field = std::string("sampling.") + key;
  if (!j.contains(key)) throw ConfigError(field, "required");
  try {
    return j[key].get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(field, "expected an array of numbers");
  }
}

}  // namespace

SamplingScheme scheme_from_json(const nlohmann::json& j, const SchemeContext& ctx) {
  if (!j.is_object()) throw ConfigError("sampling", "expected an object");
  if (!j.contains("type") || !j["type"].is_string())
    throw ConfigError("sampling.type", "required string");
  const auto type = j["type"].get<std::string>();
  if (type == "full") return scheme::Full{};
  if (type == "nice") {
    if (!j.contains("tau") || !j["tau"].is_number_integer())
      throw ConfigError("sampling.tau", "required integer");
    return scheme::Nice{j["tau"].get<int>()};
  }
  if (type == "nonuniform") return scheme::Nonuniform{real_array(j, "p")};
  if (type == "importance") {
    if (j.contains("mu")) return scheme::Importance{real_array(j, "mu")};
    if (ctx.mu.empty()) throw ConfigError("sampling.mu", "no client mu values available");
    return scheme::Importance{ctx.mu};
  }
  if (type == "block") return scheme::Block{partition_field(j, ctx), real_array(j, "q")};
  if (type == "stratified") return scheme::Stratified{partition_field(j, ctx)};
  throw ConfigError("sampling.type", "unknown sampling type '" + type + "'");
}

}  // namespace sppm
