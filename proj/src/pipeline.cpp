#include "harvnet/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <unordered_map>

#include "harvnet/csv.hpp"

namespace harvnet {

namespace {

struct NamedGroup {
  std::string name;
  std::vector<std::size_t> nodes;
};

struct ReportInputs {
  std::span<const Ipv4> nodes;
  std::span<const std::size_t> clusters;
  std::span<const std::size_t> labels;
  std::string labels_source;
  const std::vector<bool>* phishers = nullptr;
  const SparseRowMatrix* temporal = nullptr;
  std::vector<std::size_t> temporal_row;  // node -> temporal row, SIZE_MAX if absent
  std::vector<NamedGroup> groups;
  int prefix_bits = 24;
};

ValidationReport build_report(ReportInputs in) {
  ValidationReport r;
  r.harvesters = in.nodes.size();
  r.nodes.assign(in.nodes.begin(), in.nodes.end());
  r.labels_source = in.labels_source;
  if (in.nodes.size() >= 2) {
    r.rand = rand_index(pair_counts(in.labels, in.clusters));
    r.adjusted_rand = adjusted_rand_index(in.labels, in.clusters);
  } else {
    r.rand = r.adjusted_rand = std::numeric_limits<double>::quiet_NaN();
  }
  if (in.phishers) r.clusters = cluster_phishing_purity(in.clusters, *in.phishers);
  r.prefix_groups = ip_prefix_groups(in.nodes, in.prefix_bits);

  if (in.temporal) {
    for (const auto& g : r.prefix_groups) {
      if (g.members.size() >= 2) in.groups.push_back({"prefix:" + g.label, g.members});
    }
    for (const auto& g : in.groups) {
      std::vector<std::size_t> rows;
      std::string missing;
      for (const auto node : g.nodes) {
        const auto row = in.temporal_row[node];
        if (row == SIZE_MAX) {
          missing = in.nodes[node].to_string();
          break;
        }
        rows.push_back(row);
      }
      if (!missing.empty()) {
        r.rho_errors[g.name] = "harvester " + missing + " has no temporal row";
        continue;
      }
      try {
        r.rho_avg[g.name] = temporal_correlation_group(*in.temporal, rows).rho_avg;
      } catch (const InvalidInputError& e) {
        r.rho_errors[g.name] = e.what();
      }
    }
  }
  return r;
}

std::vector<std::size_t> phisher_codes(std::span<const PhishingProfile> profiles) {
  std::vector<std::size_t> codes;
  codes.reserve(profiles.size());
  for (const auto& p : profiles) codes.push_back(p.label == PhisherLabel::kPhisher ? 1 : 0);
  return codes;
}

// Cluster id of every reference harvester, renumbered in order of first
// appearance along the reference so reports do not depend on the file's ids.
// Fails on the first harvester present on only one side.
std::vector<std::size_t> aligned_clusters(std::span<const ClusterAssignment> clusters,
                                          std::span<const Ipv4> reference, const char* reference_name) {
  std::unordered_map<Ipv4, std::size_t> index;
  for (std::size_t i = 0; i < reference.size(); ++i) index.emplace(reference[i], i);
  std::vector<std::size_t> raw(reference.size(), SIZE_MAX);
  for (const auto& a : clusters) {
    const auto it = index.find(a.harvester);
    if (it == index.end()) {
      throw InvalidInputError("harvester " + a.harvester.to_string() + " is missing from the " + reference_name);
    }
    if (raw[it->second] != SIZE_MAX) {
      throw InvalidInputError("harvester " + a.harvester.to_string() + " appears twice in the cluster file");
    }
    raw[it->second] = a.cluster;
  }
  std::map<std::size_t, std::size_t> renumber;
  std::vector<std::size_t> out(reference.size());
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (raw[i] == SIZE_MAX) {
      throw InvalidInputError("harvester " + reference[i].to_string() + " is missing from the cluster file");
    }
    out[i] = renumber.emplace(raw[i], renumber.size()).first->second;
  }
  return out;
}

std::vector<std::size_t> temporal_rows(std::span<const Ipv4> nodes, const TemporalDump* temporal) {
  std::vector<std::size_t> rows(nodes.size(), SIZE_MAX);
  if (!temporal) return rows;
  std::unordered_map<Ipv4, std::size_t> index;
  for (std::size_t i = 0; i < temporal->rows.size(); ++i) index.emplace(temporal->rows[i], i);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (const auto it = index.find(nodes[i]); it != index.end()) rows[i] = it->second;
  }
  return rows;
}

}  // namespace

PipelineResult run_pipeline(std::span<const EmailEvent> events, const PipelineConfig& config,
                            const KeywordList& keywords) {
  PipelineResult r;
  r.window = window_by_month(events, config.month, config.address_scope);
  r.temporal = temporal_coincidence(r.window, config.bin_width);
  r.coincidence = config.similarity == CoincidenceKind::kTemporal ? r.temporal : server_coincidence(r.window);
  r.similarity = similarity_from_coincidence(r.coincidence, config.threads);
  r.profiles = phishing_profiles(r.window, keywords);

  const std::size_t m = r.window.num_harvesters();
  ClusterOptions options = config.cluster;
  options.threads = config.threads;
  if (m >= 2) {
    if (config.k) {
      r.k_choice = {*config.k, true};
    } else {
      const std::size_t limit = config.k_limit == 0 ? m - 1 : config.k_limit;
      r.k_choice = ensure_connectivity_k(r.similarity.s_prime, default_k(m), limit, config.threads);
    }
    r.graph = knn_graph(r.similarity.s_prime, r.k_choice.k, config.threads);
  } else {
    r.graph.w.resize(1, 1);
    r.graph.w.insert(0, 0) = 1.0;
    r.graph.components = connected_components(r.graph.w);
  }
  r.clustering = cluster(r.graph, options);

  std::vector<bool> phishers;
  for (const auto& p : r.profiles) phishers.push_back(p.label == PhisherLabel::kPhisher);
  const auto labels = phisher_codes(r.profiles);
  ReportInputs in;
  in.nodes = r.window.harvesters;
  in.clusters = r.clustering.partition.assignment;
  in.labels = labels;
  in.labels_source = "phisher";
  in.phishers = &phishers;
  in.temporal = &r.temporal.entries;
  in.temporal_row.resize(m);
  for (std::size_t i = 0; i < m; ++i) in.temporal_row[i] = i;
  in.prefix_bits = config.prefix_bits;
  r.report = build_report(std::move(in));
  return r;
}

void write_cluster_csv(std::ostream& out, std::span<const Ipv4> harvesters, const Clustering& clustering) {
  if (harvesters.size() != clustering.partition.size()) {
    throw InvalidInputError("cluster output: harvester list does not match the partition");
  }
  out << "harvester_ip,component_id,cluster_id\n";
  for (std::size_t i = 0; i < harvesters.size(); ++i) {
    out << harvesters[i].to_string() << ',' << clustering.component_of[i] << ','
        << clustering.partition.assignment[i] << '\n';
  }
}

std::vector<ClusterAssignment> read_cluster_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw InvalidInputError("cluster file is empty");
  int col_ip = -1, col_comp = -1, col_cluster = -1;
  for (std::size_t i = 0; i < header->fields.size(); ++i) {
    if (header->fields[i] == "harvester_ip") col_ip = static_cast<int>(i);
    if (header->fields[i] == "component_id") col_comp = static_cast<int>(i);
    if (header->fields[i] == "cluster_id") col_cluster = static_cast<int>(i);
  }
  if (col_ip < 0 || col_cluster < 0) {
    throw InvalidInputError("cluster file header must name harvester_ip and cluster_id");
  }
  std::vector<ClusterAssignment> out;
  while (auto rec = reader.next()) {
    const auto bad = [&] { return InvalidInputError("cluster file line " + std::to_string(rec->line) + " is malformed"); };
    if (rec->fields.size() != header->fields.size()) throw bad();
    const auto ip = Ipv4::parse(rec->fields[col_ip]);
    if (!ip) throw bad();
    ClusterAssignment a{*ip, 0, 0};
    try {
      std::size_t used = 0;
      a.cluster = std::stoull(rec->fields[col_cluster], &used);
      if (used != rec->fields[col_cluster].size()) throw bad();
      if (col_comp >= 0) a.component = std::stoull(rec->fields[col_comp]);
    } catch (const std::logic_error&) {
      throw bad();
    }
    out.push_back(a);
  }
  return out;
}

void write_phishing_csv(std::ostream& out, std::span<const Ipv4> harvesters,
                        std::span<const PhishingProfile> profiles) {
  out << "harvester_ip,phishing_emails,total_emails,phishing_level,label\n" << std::setprecision(17);
  for (const auto& p : profiles) {
    out << harvesters[p.harvester].to_string() << ',' << p.phishing_emails << ',' << p.total_emails << ','
        << p.phishing_level << ',' << to_string(p.label) << '\n';
  }
}

LabelTable read_label_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw InvalidInputError("label file is empty");
  int col_ip = -1, col_label = -1;
  for (std::size_t i = 0; i < header->fields.size(); ++i) {
    if (header->fields[i] == "harvester_ip") col_ip = static_cast<int>(i);
    if (header->fields[i] == "label") col_label = static_cast<int>(i);
  }
  if (col_ip < 0 || col_label < 0) throw InvalidInputError("label file header must name harvester_ip and label");
  LabelTable t;
  while (auto rec = reader.next()) {
    if (rec->fields.size() != header->fields.size()) {
      throw InvalidInputError("label file line " + std::to_string(rec->line) + " is malformed");
    }
    const auto ip = Ipv4::parse(rec->fields[col_ip]);
    if (!ip) throw InvalidInputError("label file line " + std::to_string(rec->line) + ": bad address");
    t.harvesters.push_back(*ip);
    t.labels.push_back(rec->fields[col_label]);
  }
  return t;
}

void write_matrix_dump(const std::filesystem::path& dir, const PipelineResult& result) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };
  const std::string kind(to_string(result.coincidence.kind));
  {
    auto out = open("H_" + kind + ".txt");
    out << "# rows " << result.coincidence.rows() << " cols " << result.coincidence.cols() << '\n';
    write_coordinate(out, result.coincidence.entries);
  }
  if (result.coincidence.kind != CoincidenceKind::kTemporal) {
    auto out = open("H_temporal.txt");
    out << "# rows " << result.temporal.rows() << " cols " << result.temporal.cols() << '\n';
    write_coordinate(out, result.temporal.entries);
  }
  {
    auto out = open("S_prime_" + kind + ".txt");
    write_coordinate(out, result.similarity.s_prime);
  }
  auto rows = open("rows.tsv");
  for (std::size_t i = 0; i < result.window.harvesters.size(); ++i) {
    rows << i << '\t' << result.window.harvesters[i].to_string() << '\n';
  }
}

TemporalDump read_temporal_dump(const std::filesystem::path& dir) {
  TemporalDump dump;
  std::ifstream rows(dir / "rows.tsv");
  if (!rows) throw IoError("cannot open " + (dir / "rows.tsv").string());
  std::string line;
  while (std::getline(rows, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const auto ip = tab == std::string::npos ? std::nullopt : Ipv4::parse(line.substr(tab + 1));
    if (!ip || std::stoull(line.substr(0, tab)) != dump.rows.size()) {
      throw InvalidInputError("rows.tsv: malformed line '" + line + "'");
    }
    dump.rows.push_back(*ip);
  }
  std::ifstream h(dir / "H_temporal.txt");
  if (!h) throw IoError("cannot open " + (dir / "H_temporal.txt").string());
  dump.h = read_coordinate(h, static_cast<Eigen::Index>(dump.rows.size()));
  // Read dimensions from the header comment when present.
  h.clear();
  h.seekg(0);
  std::string first;
  std::getline(h, first);
  long long rows_hdr = 0, cols_hdr = 0;
  if (std::sscanf(first.c_str(), "# rows %lld cols %lld", &rows_hdr, &cols_hdr) == 2 &&
      (dump.h.rows() < rows_hdr || dump.h.cols() < cols_hdr)) {
    dump.h.conservativeResize(std::max<Eigen::Index>(dump.h.rows(), rows_hdr),
                              std::max<Eigen::Index>(dump.h.cols(), cols_hdr));
  }
  if (static_cast<std::size_t>(dump.h.rows()) != dump.rows.size()) {
    throw InvalidInputError("temporal dump: matrix rows do not match rows.tsv");
  }
  return dump;
}

ValidationReport validate_against_truth(std::span<const ClusterAssignment> clusters, const GroundTruth& truth,
                                        const TemporalDump* temporal, int prefix_bits) {
  const auto cluster_ids = aligned_clusters(clusters, truth.harvesters, "ground truth");
  std::vector<std::size_t> phisher_codes_;
  for (const bool p : truth.phisher) phisher_codes_.push_back(p ? 1 : 0);
  ReportInputs in;
  in.nodes = truth.harvesters;
  in.clusters = cluster_ids;
  in.labels = truth.community;
  in.labels_source = "ground_truth.community";
  in.phishers = &truth.phisher;
  in.temporal = temporal ? &temporal->h : nullptr;
  in.temporal_row = temporal_rows(truth.harvesters, temporal);
  in.prefix_bits = prefix_bits;
  for (const auto& g : truth.groups) in.groups.push_back({"group:" + std::to_string(g.id), g.members});
  auto report = build_report(std::move(in));
  if (truth.harvesters.size() >= 2) {
    report.extra["phisher_rand"] = rand_index(pair_counts(phisher_codes_, cluster_ids));
    report.extra["phisher_adjusted_rand"] = adjusted_rand_index(phisher_codes_, cluster_ids);
  }
  return report;
}

ValidationReport validate_against_labels(std::span<const ClusterAssignment> clusters, const LabelTable& labels,
                                         const TemporalDump* temporal, int prefix_bits) {
  const auto cluster_ids = aligned_clusters(clusters, labels.harvesters, "label file");
  const auto codes = encode_labels(labels.labels);
  bool phisher_labels = true;
  std::vector<bool> phishers;
  for (const auto& l : labels.labels) {
    phisher_labels = phisher_labels && (l == "phisher" || l == "non-phisher");
    phishers.push_back(l == "phisher");
  }
  ReportInputs in;
  in.nodes = labels.harvesters;
  in.clusters = cluster_ids;
  in.labels = codes;
  in.labels_source = "labels";
  in.phishers = phisher_labels ? &phishers : nullptr;
  in.temporal = temporal ? &temporal->h : nullptr;
  in.temporal_row = temporal_rows(labels.harvesters, temporal);
  in.prefix_bits = prefix_bits;
  return build_report(std::move(in));
}

}  // namespace harvnet
