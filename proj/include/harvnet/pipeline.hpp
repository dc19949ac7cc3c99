#pragma once

// End-to-end orchestration shared by the command-line tool and the Python
// module: window -> coincidence -> similarity -> k-NN graph -> clustering ->
// validation, plus the artifact readers/writers that connect the stages.

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harvnet/graph.hpp"
#include "harvnet/ingest.hpp"
#include "harvnet/phishing.hpp"
#include "harvnet/similarity.hpp"
#include "harvnet/spectral.hpp"
#include "harvnet/synth.hpp"
#include "harvnet/validation.hpp"

namespace harvnet {

struct PipelineConfig {
  CoincidenceKind similarity = CoincidenceKind::kServerUsage;
  YearMonth month{2006, 10};
  /// nullopt: k = ceil(ln M), raised until the k-NN graph keeps the
  /// components of the full similarity graph. A value is used verbatim.
  std::optional<std::size_t> k;
  std::size_t k_limit = 0;  // upper bound for the raise; 0 means M - 1
  ClusterOptions cluster;
  AddressScope address_scope = AddressScope::kWindow;
  std::chrono::seconds bin_width = std::chrono::hours{1};
  int prefix_bits = 24;
  std::size_t threads = 1;
};

struct PipelineResult {
  EventWindow window;
  CoincidenceMatrix coincidence;  // the kind used for clustering
  CoincidenceMatrix temporal;     // always computed, feeds rho_avg
  SimilarityMatrix similarity;
  AdjacencyGraph graph;
  ConnectivityChoice k_choice;
  Clustering clustering;
  std::vector<PhishingProfile> profiles;
  ValidationReport report;  // against phisher labels
};

/// Throws EmptyWindowError when the month has no events; other module errors
/// propagate unchanged.
PipelineResult run_pipeline(std::span<const EmailEvent> events, const PipelineConfig& config,
                            const KeywordList& keywords);

struct ClusterAssignment {
  Ipv4 harvester;
  std::size_t component = 0;
  std::size_t cluster = 0;
};

/// `harvester_ip,component_id,cluster_id`, one row per harvester in row order.
void write_cluster_csv(std::ostream& out, std::span<const Ipv4> harvesters, const Clustering& clustering);
std::vector<ClusterAssignment> read_cluster_csv(std::istream& in);

/// `harvester_ip,phishing_emails,total_emails,phishing_level,label`.
void write_phishing_csv(std::ostream& out, std::span<const Ipv4> harvesters,
                        std::span<const PhishingProfile> profiles);

struct LabelTable {
  std::vector<Ipv4> harvesters;
  std::vector<std::string> labels;
};

/// Any CSV with `harvester_ip` and `label` header columns.
LabelTable read_label_csv(std::istream& in);

/// Temporal coincidence rows as dumped by write_matrix_dump.
struct TemporalDump {
  SparseRowMatrix h;
  std::vector<Ipv4> rows;
};

/// Writes H_<kind>.txt, H_temporal.txt, S_prime_<kind>.txt (coordinate
/// format) and rows.tsv (`index<TAB>harvester_ip`) into `dir`.
void write_matrix_dump(const std::filesystem::path& dir, const PipelineResult& result);
TemporalDump read_temporal_dump(const std::filesystem::path& dir);

/// Scores cluster assignments against planted ground truth: Rand/ARI against
/// communities, purity against planted phisher flags, rho_avg per
/// coordinated group (when a temporal dump is given). Throws
/// InvalidInputError naming the first harvester missing from either side.
ValidationReport validate_against_truth(std::span<const ClusterAssignment> clusters, const GroundTruth& truth,
                                        const TemporalDump* temporal = nullptr, int prefix_bits = 24);

/// Scores cluster assignments against arbitrary labels; purity is reported
/// when the labels are phisher/non-phisher.
ValidationReport validate_against_labels(std::span<const ClusterAssignment> clusters, const LabelTable& labels,
                                         const TemporalDump* temporal = nullptr, int prefix_bits = 24);

}  // namespace harvnet
