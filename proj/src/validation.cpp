#include "harvnet/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <unordered_map>

#include "harvnet/error.hpp"

namespace harvnet {

namespace {

using Wide = __int128;

Wide choose2(Wide n) { return n * (n - 1) / 2; }

Wide gcd_wide(Wide a, Wide b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const Wide t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Rational reduce(Wide num, Wide den) {
  if (den == 0) throw InvalidInputError("zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const Wide g = gcd_wide(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  constexpr Wide limit = std::numeric_limits<std::int64_t>::max();
  if (num > limit || -num > limit || den > limit) throw InvalidInputError("index does not fit a 64-bit fraction");
  return {static_cast<std::int64_t>(num), static_cast<std::int64_t>(den)};
}

void check_inputs(std::span<const std::size_t> labels, std::span<const std::size_t> clusters) {
  if (labels.size() != clusters.size()) {
    throw InvalidInputError("labels cover " + std::to_string(labels.size()) + " nodes, partition covers " +
                            std::to_string(clusters.size()));
  }
  if (labels.size() < 2) throw InvalidInputError("pair counting needs at least two nodes");
}

struct Contingency {
  Wide same_both = 0;     // sum_ij C(n_ij, 2)
  Wide same_label = 0;    // sum_i C(n_i., 2)
  Wide same_cluster = 0;  // sum_j C(n_.j, 2)
  Wide pairs = 0;         // C(M, 2)
};

Contingency contingency(std::span<const std::size_t> labels, std::span<const std::size_t> clusters) {
  check_inputs(labels, clusters);
  std::map<std::size_t, Wide> by_label, by_cluster;
  std::map<std::pair<std::size_t, std::size_t>, Wide> cells;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++by_label[labels[i]];
    ++by_cluster[clusters[i]];
    ++cells[{labels[i], clusters[i]}];
  }
  Contingency t;
  for (const auto& [key, n] : cells) t.same_both += choose2(n);
  for (const auto& [key, n] : by_label) t.same_label += choose2(n);
  for (const auto& [key, n] : by_cluster) t.same_cluster += choose2(n);
  t.pairs = choose2(static_cast<Wide>(labels.size()));
  return t;
}

}  // namespace

PairCounts pair_counts(std::span<const std::size_t> labels, std::span<const std::size_t> clusters) {
  const auto t = contingency(labels, clusters);
  PairCounts p;
  p.a = static_cast<std::uint64_t>(t.same_both);
  p.b = static_cast<std::uint64_t>(t.same_label - t.same_both);
  p.c = static_cast<std::uint64_t>(t.same_cluster - t.same_both);
  p.d = static_cast<std::uint64_t>(t.pairs - t.same_label - t.same_cluster + t.same_both);
  return p;
}

PairCounts pair_counts_exhaustive(std::span<const std::size_t> labels, std::span<const std::size_t> clusters) {
  check_inputs(labels, clusters);
  PairCounts p;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const bool same_label = labels[i] == labels[j];
      const bool same_cluster = clusters[i] == clusters[j];
      if (same_label && same_cluster) ++p.a;
      else if (same_label) ++p.b;
      else if (same_cluster) ++p.c;
      else ++p.d;
    }
  }
  return p;
}

Rational rand_index_exact(const PairCounts& counts) {
  if (counts.total() == 0) throw InvalidInputError("Rand index needs at least two nodes");
  return reduce(static_cast<Wide>(counts.a) + counts.d, static_cast<Wide>(counts.total()));
}

double rand_index(const PairCounts& counts) { return rand_index_exact(counts).to_double(); }

Rational adjusted_rand_index_exact(std::span<const std::size_t> labels, std::span<const std::size_t> clusters) {
  const auto t = contingency(labels, clusters);
  // Numerator and denominator of the chance-corrected index, both scaled by
  // 2 * C(M, 2) to stay integral.
  const Wide num = 2 * t.pairs * t.same_both - 2 * t.same_label * t.same_cluster;
  const Wide den = t.pairs * (t.same_label + t.same_cluster) - 2 * t.same_label * t.same_cluster;
  if (den == 0) return {1, 1};
  return reduce(num, den);
}

double adjusted_rand_index(std::span<const std::size_t> labels, std::span<const std::size_t> clusters) {
  return adjusted_rand_index_exact(labels, clusters).to_double();
}

std::vector<std::size_t> encode_labels(std::span<const std::string> labels) {
  std::unordered_map<std::string, std::size_t> codes;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(codes.try_emplace(l, codes.size()).first->second);
  return out;
}

GroupCorrelation temporal_correlation_group(const Eigen::SparseMatrix<double, Eigen::RowMajor>& h,
                                            std::span<const std::size_t> group) {
  const Eigen::Index n = h.cols();
  GroupCorrelation result;
  std::vector<Eigen::VectorXd> centered;
  std::vector<double> norms;
  for (const std::size_t row : group) {
    if (row >= static_cast<std::size_t>(h.rows())) {
      throw InvalidInputError("group row " + std::to_string(row) + " is outside the matrix");
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(h, static_cast<Eigen::Index>(row)); it; ++it) {
      v[it.col()] = it.value();
    }
    const double energy = v.squaredNorm();
    v.array() -= v.mean();
    const double spread = v.squaredNorm();
    if (!(spread > 1e-20 * energy) || spread == 0.0) {
      result.excluded.push_back(row);
      continue;
    }
    result.used.push_back(row);
    norms.push_back(std::sqrt(spread));
    centered.push_back(std::move(v));
  }
  if (centered.size() < 2) {
    throw InvalidInputError("fewer than two harvesters with nonzero temporal variance in group");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < centered.size(); ++i) {
    for (std::size_t j = i + 1; j < centered.size(); ++j) {
      total += centered[i].dot(centered[j]) / (norms[i] * norms[j]);
      ++result.pairs;
    }
  }
  result.rho_avg = total / static_cast<double>(result.pairs);
  return result;
}

std::string prefix_label(Ipv4 network, int prefix_bits) {
  if (prefix_bits <= 0 || prefix_bits % 8 != 0) return network.to_string() + "/" + std::to_string(prefix_bits);
  std::string out;
  for (int octet = 0; octet < prefix_bits / 8; ++octet) {
    if (octet) out.push_back('.');
    out += std::to_string((network.value() >> (24 - 8 * octet)) & 0xffu);
  }
  return out;
}

std::vector<PrefixGroup> ip_prefix_groups(std::span<const Ipv4> addresses, int prefix_bits) {
  if (prefix_bits <= 0 || prefix_bits > 32) throw ConfigError("prefix length must be in (0, 32]");
  std::map<Ipv4, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < addresses.size(); ++i) groups[addresses[i].masked(prefix_bits)].push_back(i);
  std::vector<PrefixGroup> out;
  out.reserve(groups.size());
  for (auto& [network, members] : groups) {
    out.push_back({network, prefix_label(network, prefix_bits), std::move(members)});
  }
  return out;
}

std::vector<ClusterPurity> cluster_phishing_purity(std::span<const std::size_t> clusters,
                                                   const std::vector<bool>& phishers) {
  if (clusters.size() != phishers.size()) {
    throw InvalidInputError("phisher labels do not cover the partition");
  }
  std::map<std::size_t, ClusterPurity> by_cluster;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    auto& c = by_cluster[clusters[i]];
    c.cluster = clusters[i];
    ++c.size;
    if (phishers[i]) ++c.phishers;
  }
  std::vector<ClusterPurity> out;
  out.reserve(by_cluster.size());
  for (auto& [id, c] : by_cluster) {
    const std::size_t others = c.size - c.phishers;
    c.phishing_cluster = c.phishers > others;
    c.purity = static_cast<double>(std::max(c.phishers, others)) / static_cast<double>(c.size);
    out.push_back(c);
  }
  return out;
}

nlohmann::json to_json(const ValidationReport& report) {
  nlohmann::json j;
  j["harvesters"] = report.harvesters;
  j["rand"] = report.rand;
  j["adjusted_rand"] = report.adjusted_rand;
  j["labels"] = report.labels_source;
  auto& clusters = j["clusters"] = nlohmann::json::array();
  for (const auto& c : report.clusters) {
    clusters.push_back({{"cluster_id", c.cluster},
                        {"size", c.size},
                        {"phisher_count", c.phishers},
                        {"majority_label", c.phishing_cluster ? "phishing" : "non-phishing"},
                        {"purity", c.purity}});
  }
  auto& prefixes = j["prefix_groups"] = nlohmann::json::object();
  for (const auto& g : report.prefix_groups) {
    auto& list = prefixes[g.label] = nlohmann::json::array();
    for (const auto m : g.members) {
      list.push_back(m < report.nodes.size() ? report.nodes[m].to_string() : std::to_string(m));
    }
  }
  j["rho_avg"] = report.rho_avg;
  if (!report.rho_errors.empty()) j["rho_avg_errors"] = report.rho_errors;
  if (!report.extra.empty()) j["indices"] = report.extra;
  return j;
}

}  // namespace harvnet
