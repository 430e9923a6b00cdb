#pragma once

#include "sppm/rng.hpp"
#include "sppm/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sppm {

inline constexpr double kEnumerationCap = 2e6;
inline constexpr double kProbabilityTol = 1e-12;

namespace scheme {
struct Full {};
struct Nonuniform {
  std::vector<double> p;
};
/// p_i proportional to mu_i.
struct Importance {
  std::vector<double> mu;
};
struct Nice {
  int tau = 1;
};
struct Block {
  Partition blocks;
  std::vector<double> q;
};
/// One client uniformly from every block.
struct Stratified {
  Partition blocks;
};
}  // namespace scheme

using SamplingScheme = std::variant<scheme::Full, scheme::Nonuniform,
                                    scheme::Importance, scheme::Nice,
                                    scheme::Block, scheme::Stratified>;

std::string scheme_name(const SamplingScheme& s);

/// Throws ArgumentError when the scheme is not a proper, nonvacuous sampling
/// over n clients.
void validate_scheme(const SamplingScheme& s, int n);

/// A selected cohort: sorted client indices with weights 1/(n p_i).
struct Cohort {
  std::vector<int> indices;
  std::vector<double> weights;
};

struct Atom {
  std::vector<int> cohort;  // sorted
  double probability;
};

/// Explicit finite support of a client sampling.
class SamplingDistribution {
 public:
  SamplingDistribution(int n, std::vector<Atom> support);

  int n() const { return n_; }
  const std::vector<Atom>& support() const { return support_; }
  const std::vector<double>& marginals() const { return marginals_; }
  Cohort cohort(std::size_t atom) const;

 private:
  int n_;
  std::vector<Atom> support_;
  std::vector<double> marginals_;
  std::vector<double> cumulative_;
  friend Cohort draw(const SamplingDistribution&, CounterRng&);
};

/// Size of the support `build_distribution` would enumerate.
double support_size(const SamplingScheme& s, int n);

SamplingDistribution build_distribution(const SamplingScheme& s, int n,
                                        double cap = kEnumerationCap);

Cohort draw(const SamplingDistribution& dist, CounterRng& rng);

/// Draws cohorts straight from the scheme without enumerating its support,
/// so it works for any n. Same law as drawing from build_distribution.
class CohortSampler {
 public:
  CohortSampler(SamplingScheme s, int n);

  int n() const { return n_; }
  const std::vector<double>& marginals() const { return marginals_; }
  const SamplingScheme& scheme() const { return scheme_; }
  Cohort draw(CounterRng& rng) const;

 private:
  Cohort with_weights(std::vector<int> indices) const;

  SamplingScheme scheme_;
  int n_;
  std::vector<double> marginals_;
  std::vector<double> cumulative_;  // Nonuniform / Block
};

std::vector<double> marginals_of(const SamplingScheme& s, int n);

/// min over support of sum_{i in C} mu_i/(n p_i). Ties resolve to the
/// lexicographically smallest cohort; `argmin` receives it when non-null.
double mu_as(const SamplingDistribution& dist, std::span<const double> mu,
             std::vector<int>* argmin = nullptr);

/// sum over support of p_C |sum_{i in C} g_i/(n p_i)|^2 with g_i the client
/// gradients at the minimizer.
double sigma_star_as(const SamplingDistribution& dist, std::span<const Vector> grads);

/// ((n/tau - 1)/(n - 1)) sigma1
double sigma_nice_closed_form(double sigma1, int n, int tau);

enum class ConstantsMethod { ExactEnumeration, ClosedForm, MonteCarlo };

struct SamplingConstants {
  double mu_as = 0.0;
  double sigma_star_sq = 0.0;
  ConstantsMethod method = ConstantsMethod::ExactEnumeration;
  double standard_error = 0.0;  // MonteCarlo only
};

/// Exact enumeration when the support fits under `cap`; otherwise the
/// closed forms available for Nice and Stratified. Other schemes always fit
/// (their support has at most n atoms).
SamplingConstants sampling_constants(const SamplingScheme& s, std::span<const double> mu,
                                     std::span<const Vector> grads,
                                     double cap = kEnumerationCap);

/// Monte-Carlo estimate of sigma^2 with standard error; mu_as is the
/// minimum over drawn cohorts (an upper estimate of the true minimum).
SamplingConstants monte_carlo_constants(const CohortSampler& sampler,
                                        std::span<const double> mu,
                                        std::span<const Vector> grads, int draws,
                                        std::uint64_t seed);

/// sigma_j^2 = max_{i in C_j} |g_i - mean_{C_j} g|^2
std::vector<double> cluster_sigma_sq(const Partition& blocks, std::span<const Vector> grads);

struct SsBounds {
  double weighted;  // (b/n^2) sum_j |C_j|^2 sigma_j^2
  double worst;     // b max_j sigma_j^2
};
SsBounds ss_variance_upper_bound(const Partition& blocks,
                                 std::span<const double> per_cluster_sigma_sq);

struct SsClusteringResult {
  Partition blocks;
  double sigma_sq = 0.0;
  /// Average of sigma^2_SS over every uniform clustering.
  double mean_sigma_sq = 0.0;
  std::size_t clusterings = 0;
};

/// Exhaustive search over partitions of n = b*b clients into b blocks of
/// size b. n <= 12.
SsClusteringResult optimal_ss_clustering(std::span<const Vector> grads, int b);

/// Enumerates the canonical uniform clusterings (blocks sorted, ordered by
/// first element) in lexicographic order.
std::vector<Partition> uniform_clusterings(int n, int b);

// {type: "nice"|"full"|"block"|"stratified"|"nonuniform"|"importance", ...}
/// Values a JSON scheme may refer to instead of spelling out: the string
/// "clusters" for a partition, and client mu_i for importance sampling.
struct SchemeContext {
  std::optional<Partition> clusters;
  std::vector<double> mu;
};

nlohmann::json to_json(const SamplingScheme& s);
/// Throws ConfigError naming the offending field.
SamplingScheme scheme_from_json(const nlohmann::json& j, const SchemeContext& ctx = {});

}  // namespace sppm
