#pragma once

// Pair-counting validation indices, temporal coherence and IP-prefix grouping.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <json.hpp>

#include "harvnet/types.hpp"

namespace harvnet {

/// Over all unordered node pairs: a = same label & same cluster, b = same
/// label & different cluster, c = different label & same cluster,
/// d = different label & different cluster.
struct PairCounts {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;

  std::uint64_t total() const noexcept { return a + b + c + d; }
  bool operator==(const PairCounts&) const = default;
};

/// Reduced fraction with positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double to_double() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

/// Contingency-table computation. Throws InvalidInputError on length
/// mismatch or fewer than two nodes.
PairCounts pair_counts(std::span<const std::size_t> labels, std::span<const std::size_t> clusters);
/// O(M^2) enumeration of every pair; must agree with pair_counts.
PairCounts pair_counts_exhaustive(std::span<const std::size_t> labels, std::span<const std::size_t> clusters);

/// (a + d) / (a + b + c + d).
Rational rand_index_exact(const PairCounts& counts);
double rand_index(const PairCounts& counts);

/// Hubert-Arabie adjusted Rand index from the contingency table. 0/0 (both
/// partitions trivial) is defined as 1.
Rational adjusted_rand_index_exact(std::span<const std::size_t> labels, std::span<const std::size_t> clusters);
double adjusted_rand_index(std::span<const std::size_t> labels, std::span<const std::size_t> clusters);

/// Dense integer codes for arbitrary label strings, in first-appearance order.
std::vector<std::size_t> encode_labels(std::span<const std::string> labels);

struct GroupCorrelation {
  double rho_avg = 0.0;
  std::vector<std::size_t> used;      // rows that entered the average
  std::vector<std::size_t> excluded;  // zero-variance rows
  std::size_t pairs = 0;
};

/// Mean Pearson correlation over all unordered pairs of distinct group rows.
/// Zero-variance rows are excluded; throws InvalidInputError if fewer than
/// two rows remain.
GroupCorrelation temporal_correlation_group(const Eigen::SparseMatrix<double, Eigen::RowMajor>& h,
                                            std::span<const std::size_t> group);

/// Label of a prefix: the leading octets for byte-aligned prefixes
/// ("208.66.195" for /24), otherwise CIDR notation ("10.0.0.0/20").
std::string prefix_label(Ipv4 network, int prefix_bits);

struct PrefixGroup {
  Ipv4 network;
  std::string label;
  std::vector<std::size_t> members;  // indices into the input span
};

/// Groups addresses by their leading `prefix_bits` bits, ordered by network
/// address; singletons included. Throws ConfigError unless 0 < bits <= 32.
std::vector<PrefixGroup> ip_prefix_groups(std::span<const Ipv4> addresses, int prefix_bits = 24);

struct ClusterPurity {
  std::size_t cluster = 0;
  std::size_t size = 0;
  std::size_t phishers = 0;
  bool phishing_cluster = false;  // strictly more phishers than non-phishers
  double purity = 0.0;            // majority-class fraction
};

/// Per-cluster phisher counts for clusters 0..max id; empty ids are skipped.
std::vector<ClusterPurity> cluster_phishing_purity(std::span<const std::size_t> clusters,
                                                   const std::vector<bool>& phishers);

/// Everything a validation report carries. Serialized by to_json.
struct ValidationReport {
  std::size_t harvesters = 0;
  double rand = 0.0;
  double adjusted_rand = 0.0;
  std::string labels_source;  // what rand/adjusted_rand were scored against
  std::vector<ClusterPurity> clusters;
  std::vector<PrefixGroup> prefix_groups;
  std::vector<Ipv4> nodes;  // index -> address, used when printing prefix groups
  std::map<std::string, double> rho_avg;
  std::map<std::string, std::string> rho_errors;
  std::map<std::string, double> extra;  // additional named indices
};

/// `{rand, adjusted_rand, clusters: [...], prefix_groups: {...}, rho_avg: {...}}`
/// plus `harvesters`, `labels`, and optional `rho_avg_errors` / `indices`.
nlohmann::json to_json(const ValidationReport& report);

}  // namespace harvnet
