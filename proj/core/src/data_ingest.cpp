#include "sppm/data_ingest.hpp"

#include "sppm/errors.hpp"
#include "sppm/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>

namespace sppm {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

bool parse_double(std::string_view tok, double& out) {
  // from_chars rejects a leading '+', which LibSVM files commonly use.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

int map_label(std::string_view tok, std::size_t line) {
  double v = 0.0;
  if (!parse_double(tok, v)) throw ParseError(line, "malformed label '" + std::string(tok) + "'");
  if (v == 1.0) return 1;
  if (v == -1.0 || v == 0.0) return -1;
  throw ParseError(line, "label '" + std::string(tok) + "' is not one of -1, 0, +1");
}

DataPoint parse_line(std::string_view text, std::size_t line) {
  DataPoint p;
  std::size_t pos = 0;
  bool first = true;
  long long last_index = -1;
  while (pos < text.size()) {
    const auto start = text.find_first_not_of(" \t", pos);
    if (start == std::string_view::npos) break;
    auto end = text.find_first_of(" \t", start);
    if (end == std::string_view::npos) end = text.size();
    const auto tok = text.substr(start, end - start);
    pos = end;
    if (first) {
      p.label = map_label(tok, line);
      first = false;
      continue;
    }
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos)
      throw ParseError(line, "malformed token '" + std::string(tok) + "'");
    unsigned long long idx = 0;
    const auto idx_tok = tok.substr(0, colon);
    const auto [iptr, iec] =
        std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
    if (iec != std::errc() || iptr != idx_tok.data() + idx_tok.size() || idx < 1 ||
        idx > std::numeric_limits<std::uint32_t>::max())
      throw ParseError(line, "malformed index in '" + std::string(tok) + "'");
    double value = 0.0;
    if (!parse_double(tok.substr(colon + 1), value))
      throw ParseError(line, "malformed value in '" + std::string(tok) + "'");
    const auto zero_based = static_cast<long long>(idx) - 1;
    if (zero_based <= last_index)
      throw ParseError(line, "feature indices are not strictly increasing");
    last_index = zero_based;
    p.features.push_back({static_cast<std::uint32_t>(zero_based), value});
  }
  return p;
}

}  // namespace

std::vector<DataPoint> parse_libsvm(std::istream& in) {
  std::vector<DataPoint> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto body = trim(line);
    if (body.empty()) continue;
    out.push_back(parse_line(body, number));
  }
  return out;
}

std::vector<DataPoint> parse_libsvm(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in);
}

std::vector<DataPoint> load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open LibSVM file '" + path + "'");
  return parse_libsvm(in);
}

void write_libsvm(std::ostream& out, std::span<const DataPoint> points) {
  char buf[64];
  for (const auto& p : points) {
    out << (p.label > 0 ? "+1" : "-1");
    for (const auto& f : p.features) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", f.index + 1, f.value);
      out << buf;
    }
    out << '\n';
  }
}

std::string to_libsvm(std::span<const DataPoint> points) {
  std::ostringstream out;
  write_libsvm(out, points);
  return out.str();
}

std::size_t infer_dimension(std::span<const DataPoint> points) {
  std::size_t d = 0;
  for (const auto& p : points)
    if (!p.features.empty()) d = std::max<std::size_t>(d, p.features.back().index + 1);
  return d;
}

Vector to_dense(const DataPoint& p, std::size_t dimension) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(dimension));
  for (const auto& f : p.features) {
    if (f.index >= dimension) throw ArgumentError("feature index exceeds dimension");
    v[f.index] = f.value;
  }
  return v;
}

void scale_max_abs(std::vector<DataPoint>& points) {
  const auto d = infer_dimension(points);
  std::vector<double> scale(d, 0.0);
  for (const auto& p : points)
    for (const auto& f : p.features) scale[f.index] = std::max(scale[f.index], std::abs(f.value));
  for (auto& p : points)
    for (auto& f : p.features)
      if (scale[f.index] > 0.0) f.value /= scale[f.index];
}

Partition FederatedDataset::cluster_partition() const {
  if (!cluster_of) throw ArgumentError("dataset has no cluster metadata");
  const int k = cluster_of->empty() ? 0 : *std::max_element(cluster_of->begin(), cluster_of->end()) + 1;
  Partition blocks(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < cluster_of->size(); ++i)
    blocks[static_cast<std::size_t>((*cluster_of)[i])].push_back(static_cast<int>(i));
  return blocks;
}

namespace {

double wcss(std::span<const Vector> points, const std::vector<int>& assign,
            const std::vector<Vector>& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    s += (points[i] - centroids[static_cast<std::size_t>(assign[i])]).squaredNorm();
  return s;
}

// k-means++ seeding.
std::vector<Vector> seed_centroids(std::span<const Vector> points, int k, CounterRng& rng) {
  const auto n = points.size();
  std::vector<Vector> centroids;
  centroids.push_back(points[rng.below(n)]);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (points[i] - centroids.back()).squaredNorm());
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (acc > target && dist[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining points coincide with chosen centroids.
      pick = rng.below(n);
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

}  // namespace

ClusterAssignment kmeans(std::span<const Vector> points, int k, std::uint64_t seed,
                         int max_iters) {
  if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > points.size())
    throw ArgumentError("kmeans: k = " + std::to_string(k) + " exceeds the number of points (" +
                        std::to_string(points.size()) + ")");
  const auto n = points.size();
  CounterRng rng(seed, 0x6b6d65616e73ULL);

  ClusterAssignment out;
  out.k = k;
  out.centroids = seed_centroids(points, k, rng);
  out.assign.assign(n, -1);

  for (int iter = 0; iter < std::max(1, max_iters); ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double dd = (points[i] - out.centroids[static_cast<std::size_t>(c)]).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (out.assign[i] != best) {
        out.assign[i] = best;
        changed = true;
      }
    }

    // Empty cluster repair: move its centroid onto the point farthest from
    // its current centroid and give that point to it.
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int a : out.assign) ++counts[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(out.assign[i])] <= 1) continue;
        const double dd =
            (points[i] - out.centroids[static_cast<std::size_t>(out.assign[i])]).squaredNorm();
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(out.assign[far])];
      out.assign[far] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      out.centroids[static_cast<std::size_t>(c)] = points[far];
      changed = true;
    }

    const auto dim = points.front().size();
    std::vector<Vector> sums(static_cast<std::size_t>(k), Vector::Zero(dim));
    for (std::size_t i = 0; i < n; ++i) sums[static_cast<std::size_t>(out.assign[i])] += points[i];
    for (int c = 0; c < k; ++c)
      out.centroids[static_cast<std::size_t>(c)] =
          sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];

    out.objective_history.push_back(wcss(points, out.assign, out.centroids));
    out.iterations = iter + 1;
    if (!changed && iter > 0) break;
  }
  return out;
}

FederatedDataset partition_noniid(std::span<const DataPoint> points, int clusters,
                                  int clients_per_cluster, std::uint64_t seed,
                                  std::optional<std::size_t> dimension) {
  if (clusters < 1 || clients_per_cluster < 1)
    throw ArgumentError("partition_noniid: clusters and clients_per_cluster must be >= 1");
  const auto needed = static_cast<std::size_t>(clusters) * static_cast<std::size_t>(clients_per_cluster);
  if (points.size() < needed)
    throw ArgumentError("partition_noniid: " + std::to_string(points.size()) +
                        " points cannot fill " + std::to_string(needed) + " clients");
  const auto d = dimension.value_or(infer_dimension(points));
  if (infer_dimension(points) > d) throw ArgumentError("partition_noniid: feature index >= dimension");

  std::vector<Vector> dense;
  dense.reserve(points.size());
  for (const auto& p : points) dense.push_back(to_dense(p, d));
  const auto km = kmeans(dense, clusters, seed);

  // Renumber clusters by first appearance.
  std::vector<int> relabel(static_cast<std::size_t>(clusters), -1);
  int next = 0;
  for (int a : km.assign)
    if (relabel[static_cast<std::size_t>(a)] < 0) relabel[static_cast<std::size_t>(a)] = next++;

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(clusters));
  for (std::size_t i = 0; i < points.size(); ++i)
    members[static_cast<std::size_t>(relabel[static_cast<std::size_t>(km.assign[i])])].push_back(i);

  FederatedDataset out;
  out.dimension = d;
  out.clusters = clusters;
  out.clients_per_cluster = clients_per_cluster;
  out.seed = seed;
  out.cluster_of.emplace();
  for (int c = 0; c < clusters; ++c) {
    const auto& idx = members[static_cast<std::size_t>(c)];
    if (idx.size() < static_cast<std::size_t>(clients_per_cluster))
      throw PartitionError(c, "has " + std::to_string(idx.size()) + " points, fewer than " +
                                  std::to_string(clients_per_cluster) + " clients");
    const auto base = out.shards.size();
    for (int m = 0; m < clients_per_cluster; ++m) {
      ClientShard s;
      s.client_id = static_cast<int>(base) + m;
      out.shards.push_back(std::move(s));
      out.cluster_of->push_back(c);
    }
    for (std::size_t r = 0; r < idx.size(); ++r)
      out.shards[base + r % static_cast<std::size_t>(clients_per_cluster)].points.push_back(points[idx[r]]);
  }
  return out;
}

nlohmann::json partition_manifest(const FederatedDataset& data) {
  nlohmann::json j;
  j["n"] = data.num_clients();
  j["d"] = data.dimension;
  j["q"] = data.clusters;
  j["m"] = data.clients_per_cluster;
  j["seed"] = data.seed;
  j["cluster_of"] = data.cluster_of.value_or(std::vector<int>{});
  return j;
}

std::vector<QuadraticSpec> synthetic_quadratic(int n, int d, std::uint64_t seed, double spread) {
  if (n < 1 || d < 1) throw ArgumentError("synthetic_quadratic: n and d must be >= 1");
  if (!(spread >= 0.0)) throw ArgumentError("synthetic_quadratic: spread must be >= 0");
  CounterRng rng(seed, 0x71756164ULL);
  // Box-Muller; no std:: distributions, the instance is identical on every
  // standard library.
  auto normal = [&rng] {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  auto gaussian_matrix = [&](int rows, int cols) {
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) m(r, c) = normal();
    return m;
  };
  auto gaussian_vector = [&](int size) {
    Vector v(size);
    for (int i = 0; i < size; ++i) v[i] = normal();
    return v;
  };

  const Matrix base_m = gaussian_matrix(d, d);
  const Matrix base_a = base_m * base_m.transpose() / d + 0.1 * Matrix::Identity(d, d);
  const Vector base_b = gaussian_vector(d);

  std::vector<QuadraticSpec> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Matrix r = gaussian_matrix(d, d);
    const Vector g = gaussian_vector(d);
    QuadraticSpec q;
    q.A = base_a + spread * (r * r.transpose()) / d;
    q.A = 0.5 * (q.A + q.A.transpose());
    q.b = base_b + spread * g;
    out.push_back(std::move(q));
  }
  return out;
}

nlohmann::json to_json(const QuadraticSpec& q) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index r = 0; r < q.A.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(q.A.cols()));
    for (Eigen::Index c = 0; c < q.A.cols(); ++c) row[static_cast<std::size_t>(c)] = q.A(r, c);
    a.push_back(row);
  }
  return {{"A", a}, {"b", std::vector<double>(q.b.data(), q.b.data() + q.b.size())}, {"c", q.c}};
}

QuadraticSpec quadratic_from_json(const nlohmann::json& j) {
  const auto rows = j.at("A").get<std::vector<std::vector<double>>>();
  const auto b = j.at("b").get<std::vector<double>>();
  const auto d = static_cast<Eigen::Index>(b.size());
  QuadraticSpec q;
  q.A.resize(d, d);
  if (static_cast<Eigen::Index>(rows.size()) != d) throw ArgumentError("quadratic: A must be d x d");
  for (Eigen::Index r = 0; r < d; ++r) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != d)
      throw ArgumentError("quadratic: A must be d x d");
    for (Eigen::Index c = 0; c < d; ++c) q.A(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  q.b = Eigen::Map<const Vector>(b.data(), d);
  q.c = j.value("c", 0.0);
  return q;
}

}  // namespace sppm
