#pragma once

#include "sppm/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sppm {

struct SparseEntry {
  std::uint32_t index;  // 0-based
  double value;
  bool operator==(const SparseEntry&) const = default;
};

/// One labeled example. Indices are strictly increasing; label is -1 or +1.
struct DataPoint {
  std::vector<SparseEntry> features;
  int label = 1;
  bool operator==(const DataPoint&) const = default;
};

struct ClientShard {
  int client_id = 0;
  std::vector<DataPoint> points;
  std::size_t size() const { return points.size(); }
};

struct FederatedDataset {
  std::vector<ClientShard> shards;
  std::size_t dimension = 0;
  std::optional<std::vector<int>> cluster_of;  // client id -> cluster
  int clusters = 0;
  int clients_per_cluster = 0;
  std::uint64_t seed = 0;

  std::size_t num_clients() const { return shards.size(); }
  /// Client ids grouped by cluster; requires cluster_of.
  Partition cluster_partition() const;
};

struct ClusterAssignment {
  int k = 0;
  std::vector<int> assign;
  std::vector<Vector> centroids;
  /// Within-cluster sum of squares after each Lloyd iteration.
  std::vector<double> objective_history;
  int iterations = 0;
};

/// Quadratic client f(x) = 1/2 x'Ax - b'x + c.
struct QuadraticSpec {
  Matrix A;
  Vector b;
  double c = 0.0;
};

// LibSVM text: `<label> [<idx>:<val>]*`, 1-based indices in the file.
std::vector<DataPoint> parse_libsvm(std::istream& in);
std::vector<DataPoint> parse_libsvm(std::string_view text);
std::vector<DataPoint> load_libsvm(const std::string& path);
void write_libsvm(std::ostream& out, std::span<const DataPoint> points);
std::string to_libsvm(std::span<const DataPoint> points);

/// 1 + largest feature index, or 0 for an empty / featureless set.
std::size_t infer_dimension(std::span<const DataPoint> points);
Vector to_dense(const DataPoint& p, std::size_t dimension);

/// Divides every coordinate by its maximum absolute value (columns that are
/// identically zero are left alone).
void scale_max_abs(std::vector<DataPoint>& points);

ClusterAssignment kmeans(std::span<const Vector> points, int k,
                         std::uint64_t seed, int max_iters = 300);

/// K-means on the feature vectors, then each cluster's points are dealt
/// round-robin to `clients_per_cluster` clients. Clusters are renumbered by
/// their smallest member index so cluster 0 holds point 0.
FederatedDataset partition_noniid(std::span<const DataPoint> points,
                                  int clusters, int clients_per_cluster,
                                  std::uint64_t seed,
                                  std::optional<std::size_t> dimension = {});

/// {n, d, q, m, seed, cluster_of}
nlohmann::json partition_manifest(const FederatedDataset& data);

/// Every A_i has smallest eigenvalue >= 0.1. spread = 0 makes all clients
/// identical.
std::vector<QuadraticSpec> synthetic_quadratic(int n, int d, std::uint64_t seed,
                                               double spread);

nlohmann::json to_json(const QuadraticSpec& q);
QuadraticSpec quadratic_from_json(const nlohmann::json& j);

}  // namespace sppm
