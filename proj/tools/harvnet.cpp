// harvnet: command-line driver for the harvester community pipeline.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "harvnet/error.hpp"
#include "harvnet/pipeline.hpp"
#include "harvnet/version.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitEmpty = 2;
constexpr int kExitUsage = 64;

// Exits with the usage code; thrown from subcommand bodies.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw harvnet::IoError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, in.gcount());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw harvnet::IoError("cannot write " + path.string());
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw harvnet::IoError("cannot create " + dir.string() + ": " + ec.message());
}

// "auto" or a positive integer.
std::optional<std::size_t> parse_auto(const std::string& text, const char* flag) {
  if (text == "auto") return std::nullopt;
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != text.size() || v == 0 || text.front() == '-') {
    throw UsageError(std::string(flag) + " must be 'auto' or a positive integer, got '" + text + "'");
  }
  return v;
}

harvnet::YearMonth parse_month(const std::string& text) {
  const auto m = harvnet::YearMonth::parse(text);
  if (!m) throw UsageError("invalid month '" + text + "' (expected YYYY-MM)");
  return *m;
}

harvnet::LogFormat resolve_format(const std::string& name, const std::string& path) {
  if (name.empty()) return fs::path(path).extension() == ".jsonl" ? harvnet::LogFormat::kJsonl : harvnet::LogFormat::kCsv;
  const auto f = harvnet::parse_log_format(name);
  if (!f) throw UsageError("unknown log format '" + name + "' (csv or jsonl)");
  return *f;
}

std::vector<harvnet::EmailEvent> load_events(const std::string& path, harvnet::LogFormat format) {
  auto parsed = harvnet::parse_event_log_file(path, format);
  if (!parsed.malformed.empty()) {
    std::cerr << "warning: " << parsed.malformed.size() << " malformed record(s) skipped in " << path
              << " (first at line " << parsed.malformed.front().line << ": " << parsed.malformed.front().reason
              << ")\n";
  }
  return std::move(parsed.events);
}

harvnet::KeywordList load_keywords(const std::string& path) {
  return path.empty() ? harvnet::KeywordList::defaults() : harvnet::KeywordList::load(path);
}

// Options shared by `cluster` and `export`.
struct PipelineArgs {
  std::string input;
  std::string format;
  std::string similarity = "server-usage";
  std::string month;
  std::string k = "auto";
  std::size_t k_limit = 0;
  std::string big_k = "auto";
  std::size_t k_max = 100;
  double lambda_floor = harvnet::kDefaultLambdaFloor;
  std::size_t min_component_size = 10;
  double eig_tol = 1e-8;
  std::string keywords;
  std::string out = ".";
  std::string dump_matrices;
  std::string address_scope = "window";
  long long bin_width = 3600;
  int prefix_bits = 24;
  std::size_t threads = 1;
  std::string config;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "key = value file; flags on the command line take precedence")
        ->check(CLI::ExistingFile);
    app->add_option("input,--input,-i", input, "event log (CSV or JSONL)")->required()->check(CLI::ExistingFile);
    app->add_option("--format", format, "csv or jsonl (default: from the file extension)");
    app->add_option("--similarity", similarity, "server-usage or temporal")->capture_default_str();
    app->add_option("--month", month, "analysis month, YYYY-MM (required)");
    app->add_option("--k", k, "neighbors per node: 'auto' or an integer")->capture_default_str();
    app->add_option("--k-limit,--k_limit", k_limit, "largest k tried by the connectivity repair (0: M-1)")
        ->capture_default_str();
    app->add_option("--K", big_k, "clusters per large component: 'auto' or an integer")->capture_default_str();
    app->add_option("--K-max,--K_max", k_max, "largest K the eigengap may select")->capture_default_str();
    app->add_option("--lambda-floor,--lambda_floor", lambda_floor, "eigengap ignores eigenvalues below this")
        ->capture_default_str();
    app->add_option("--min-component-size,--min_component_size", min_component_size,
                    "smaller components form one cluster each")
        ->capture_default_str();
    app->add_option("--eig-tol,--eig_tol", eig_tol, "iterative eigensolver residual tolerance")->capture_default_str();
    app->add_option("--keywords", keywords, "phishing keyword file (default: built-in list)")
        ->check(CLI::ExistingFile);
    app->add_option("--out,-o", out, "output directory")->capture_default_str();
    app->add_option("--dump-matrices,--dump_matrices", dump_matrices, "write H and S' in coordinate format here");
    app->add_option("--address-scope,--address_scope", address_scope,
                    "where e_i is counted: window or all-time")
        ->capture_default_str();
    app->add_option("--bin-width,--bin_width", bin_width, "temporal bin width in seconds")->capture_default_str();
    app->add_option("--prefix-bits,--prefix_bits", prefix_bits, "IP prefix length for grouping")
        ->capture_default_str();
    app->add_option("--threads", threads, "worker threads")->capture_default_str();
  }

  harvnet::PipelineConfig resolve() const {
    if (month.empty()) throw UsageError("--month is required");
    harvnet::PipelineConfig c;
    const auto kind = harvnet::parse_coincidence_kind(similarity);
    if (!kind) throw UsageError("unknown similarity '" + similarity + "' (server-usage or temporal)");
    c.similarity = *kind;
    c.month = parse_month(month);
    c.k = parse_auto(k, "--k");
    c.k_limit = k_limit;
    c.cluster.k = parse_auto(big_k, "--K");
    c.cluster.k_max = k_max;
    c.cluster.lambda_floor = lambda_floor;
    c.cluster.min_component_size = min_component_size;
    c.cluster.eigen.tol = eig_tol;
    if (address_scope == "window") {
      c.address_scope = harvnet::AddressScope::kWindow;
    } else if (address_scope == "all-time") {
      c.address_scope = harvnet::AddressScope::kAllTime;
    } else {
      throw UsageError("unknown address scope '" + address_scope + "' (window or all-time)");
    }
    if (bin_width <= 0) throw UsageError("--bin-width must be positive");
    c.bin_width = std::chrono::seconds{bin_width};
    c.prefix_bits = prefix_bits;
    c.threads = threads == 0 ? 1 : threads;
    return c;
  }

  // Every setting that can change the outputs; threads is excluded on purpose.
  ordered_json manifest_config() const {
    return ordered_json{{"similarity", similarity},
                        {"month", month},
                        {"k", k},
                        {"k_limit", k_limit},
                        {"K", big_k},
                        {"K_max", k_max},
                        {"lambda_floor", lambda_floor},
                        {"min_component_size", min_component_size},
                        {"eig_tol", eig_tol},
                        {"address_scope", address_scope},
                        {"bin_width", bin_width},
                        {"prefix_bits", prefix_bits},
                        {"format", format.empty() ? "auto" : format},
                        {"keywords", keywords.empty() ? "builtin" : keywords}};
  }
};

// Applies `key = value` settings to options not given on the command line.
// Keys are option long names without the leading dashes.
void apply_config_file(CLI::App* app, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw UsageError(path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == "default")) {
      throw UsageError(path + ": sections are not supported ('" + item.fullname() + "')");
    }
    if (item.name == "config") throw UsageError(path + ": config files cannot include other config files");
    auto* opt = app->get_option_no_throw("--" + item.name);
    if (opt == nullptr) throw UsageError(path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ": " + item.name + ": " + e.what());
    }
  }
}

ordered_json input_entry(const std::string& path) {
  return ordered_json{{"path", path}, {"sha256", sha256_file(path)}, {"bytes", fs::file_size(path)}};
}

void write_manifest(const fs::path& dir, const std::string& command, ordered_json config, ordered_json inputs,
                    const std::vector<std::string>& outputs) {
  ordered_json m{{"tool", "harvnet"},
                 {"version", harvnet::kVersion},
                 {"command", command},
                 {"config", std::move(config)},
                 {"inputs", std::move(inputs)},
                 {"outputs", outputs}};
  auto out = open_out(dir / "run_manifest.json");
  out << m.dump(2) << '\n';
}

nlohmann::json run_summary(const harvnet::PipelineResult& r) {
  nlohmann::json comps = nlohmann::json::array();
  for (std::size_t c = 0; c < r.clustering.components.size(); ++c) {
    const auto& comp = r.clustering.components[c];
    nlohmann::json e{{"component_id", c},
                     {"size", comp.nodes.size()},
                     {"K", comp.k},
                     {"first_cluster", comp.first_cluster},
                     {"spectral", comp.spectral}};
    std::vector<double> eig(comp.eigenvalues.data(),
                            comp.eigenvalues.data() + std::min<Eigen::Index>(comp.eigenvalues.size(), 20));
    e["leading_eigenvalues"] = eig;
    comps.push_back(std::move(e));
  }
  return nlohmann::json{{"similarity", std::string(harvnet::to_string(r.coincidence.kind))},
                        {"month", r.window.month.to_string()},
                        {"events", r.window.events.size()},
                        {"servers", r.window.num_servers()},
                        {"k", r.graph.k},
                        {"k_preserves_components", r.k_choice.satisfied},
                        {"clusters", r.clustering.partition.k},
                        {"components", std::move(comps)}};
}

int cmd_cluster(const PipelineArgs& args, bool export_only) {
  const auto config = args.resolve();
  const auto keywords = load_keywords(args.keywords);
  const auto events = load_events(args.input, resolve_format(args.format, args.input));
  const auto result = harvnet::run_pipeline(events, config, keywords);

  const fs::path dir(args.out);
  make_dir(dir);
  std::vector<std::string> outputs;
  {
    auto out = open_out(dir / "edges.tsv");
    harvnet::write_edge_list(out, result.graph.w, result.window.harvesters);
    outputs.push_back("edges.tsv");
  }
  if (export_only) {
    // Node attribute table for graph visualizers.
    auto out = open_out(dir / "nodes.tsv");
    out << "harvester_ip\tcomponent_id\tcluster_id\tphishing_level\tlabel\tprefix\n" << std::setprecision(17);
    for (std::size_t i = 0; i < result.window.harvesters.size(); ++i) {
      const auto ip = result.window.harvesters[i];
      out << ip.to_string() << '\t' << result.clustering.component_of[i] << '\t'
          << result.clustering.partition.assignment[i] << '\t' << result.profiles[i].phishing_level << '\t'
          << harvnet::to_string(result.profiles[i].label) << '\t'
          << harvnet::prefix_label(ip.masked(config.prefix_bits), config.prefix_bits) << '\n';
    }
    outputs.push_back("nodes.tsv");
  } else {
    {
      auto out = open_out(dir / "clusters.csv");
      harvnet::write_cluster_csv(out, result.window.harvesters, result.clustering);
      outputs.push_back("clusters.csv");
    }
    {
      auto out = open_out(dir / "phishing.csv");
      harvnet::write_phishing_csv(out, result.window.harvesters, result.profiles);
      outputs.push_back("phishing.csv");
    }
    {
      auto report = harvnet::to_json(result.report);
      report["run"] = run_summary(result);
      auto out = open_out(dir / "report.json");
      out << report.dump(2) << '\n';
      outputs.push_back("report.json");
    }
  }
  if (!args.dump_matrices.empty()) harvnet::write_matrix_dump(args.dump_matrices, result);

  ordered_json inputs{{"events", input_entry(args.input)}};
  if (!args.keywords.empty()) inputs["keywords"] = input_entry(args.keywords);
  write_manifest(dir, export_only ? "export" : "cluster", args.manifest_config(), std::move(inputs), outputs);

  std::cerr << "month " << result.window.month.to_string() << ": " << result.window.num_harvesters()
            << " harvesters, k = " << result.graph.k << ", " << result.clustering.components.size()
            << " component(s), " << result.clustering.partition.k << " cluster(s)\n";
  return kExitOk;
}

struct ValidateArgs {
  std::string clusters;
  std::string truth;
  std::string labels;
  std::string temporal;
  std::string out = "validation.json";
  int prefix_bits = 24;
};

int cmd_validate(const ValidateArgs& args) {
  std::ifstream cin_(args.clusters);
  if (!cin_) throw harvnet::IoError("cannot read " + args.clusters);
  const auto assignments = harvnet::read_cluster_csv(cin_);
  std::optional<harvnet::TemporalDump> dump;
  if (!args.temporal.empty()) dump = harvnet::read_temporal_dump(args.temporal);
  const harvnet::TemporalDump* t = dump ? &*dump : nullptr;

  harvnet::ValidationReport report;
  if (!args.truth.empty()) {
    std::ifstream in(args.truth);
    if (!in) throw harvnet::IoError("cannot read " + args.truth);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw harvnet::InvalidInputError(args.truth + ": " + e.what());
    }
    report = harvnet::validate_against_truth(assignments, harvnet::ground_truth_from_json(j), t, args.prefix_bits);
  } else {
    std::ifstream in(args.labels);
    if (!in) throw harvnet::IoError("cannot read " + args.labels);
    report = harvnet::validate_against_labels(assignments, harvnet::read_label_csv(in), t, args.prefix_bits);
  }
  const auto text = harvnet::to_json(report).dump(2);
  std::cout << text << '\n';
  const fs::path out(args.out);
  if (out.has_parent_path()) make_dir(out.parent_path());
  auto file = open_out(out);
  file << text << '\n';
  return kExitOk;
}

struct SynthArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

int cmd_synth(const SynthArgs& args) {
  harvnet::ScenarioConfig config;
  try {
    if (!args.scenario.empty()) config = harvnet::load_scenario_config(args.scenario);
    if (args.seed) config.seed = *args.seed;
    config.validate();
  } catch (const harvnet::ConfigError& e) {
    throw UsageError(std::string("invalid scenario: ") + e.what());
  }
  const auto scenario = harvnet::generate_scenario(config);
  const fs::path dir(args.out);
  make_dir(dir);
  {
    auto out = open_out(dir / "events.csv");
    harvnet::write_events_csv(out, scenario.events);
  }
  {
    auto out = open_out(dir / "ground_truth.json");
    out << harvnet::to_json(scenario.truth, config).dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "scenario.cfg");
    out << harvnet::to_config_text(config);
  }
  ordered_json inputs = ordered_json::object();
  if (!args.scenario.empty()) inputs["scenario"] = input_entry(args.scenario);
  write_manifest(dir, "synth", ordered_json{{"scenario", harvnet::to_config_text(config)}}, std::move(inputs),
                 {"events.csv", "ground_truth.json", "scenario.cfg"});
  std::cerr << "wrote " << scenario.events.size() << " events for " << scenario.truth.harvesters.size()
            << " harvesters to " << dir.string() << '\n';
  return kExitOk;
}

struct ReportArgs {
  std::string input;
  std::string format;
  std::string addresses;
  std::string month;
  std::string keywords;
  double bin_width = 0.1;
  std::string out = ".";
};

int cmd_ingest_report(const ReportArgs& args) {
  std::optional<harvnet::YearMonth> month;
  if (!args.month.empty()) month = parse_month(args.month);
  const auto events = load_events(args.input, resolve_format(args.format, args.input));
  const fs::path dir(args.out);
  make_dir(dir);
  std::vector<std::string> outputs;

  {
    auto out = open_out(dir / "volume.csv");
    out << std::setprecision(17);
    if (!args.addresses.empty()) {
      std::ifstream in(args.addresses);
      if (!in) throw harvnet::IoError("cannot read " + args.addresses);
      out << "month,emails,addresses,emails_per_address\n";
      for (const auto& row : harvnet::monthly_volume_report(events, harvnet::read_address_counts(in))) {
        out << row.month.to_string() << ',' << row.emails << ',' << row.addresses << ',' << row.ratio << '\n';
      }
    } else {
      std::map<harvnet::YearMonth, std::uint64_t> counts;
      for (const auto& e : events) ++counts[harvnet::YearMonth::of(e.timestamp)];
      out << "month,emails\n";
      for (const auto& [m, n] : counts) out << m.to_string() << ',' << n << '\n';
    }
    outputs.push_back("volume.csv");
  }

  if (month) {
    const auto window = harvnet::window_by_month(events, *month);
    const auto profiles = harvnet::phishing_profiles(window, load_keywords(args.keywords));
    {
      auto out = open_out(dir / "phishing.csv");
      harvnet::write_phishing_csv(out, window.harvesters, profiles);
    }
    const auto hist = harvnet::phishing_level_histogram(profiles, args.bin_width);
    {
      auto out = open_out(dir / "phishing_histogram.csv");
      out << "bin_lo,bin_hi,harvesters\n" << std::setprecision(17);
      for (std::size_t b = 0; b < hist.counts.size(); ++b) {
        out << b * hist.bin_width << ',' << std::min(1.0, (b + 1) * hist.bin_width) << ',' << hist.counts[b]
            << '\n';
      }
    }
    outputs.push_back("phishing.csv");
    outputs.push_back("phishing_histogram.csv");
    std::size_t phishers = 0;
    for (const auto& p : profiles) phishers += p.label == harvnet::PhisherLabel::kPhisher;
    std::cerr << month->to_string() << ": " << profiles.size() << " harvesters, " << phishers << " phisher(s)\n";
  }

  ordered_json inputs{{"events", input_entry(args.input)}};
  if (!args.addresses.empty()) inputs["addresses"] = input_entry(args.addresses);
  if (!args.keywords.empty()) inputs["keywords"] = input_entry(args.keywords);
  write_manifest(dir, "ingest-report",
                 ordered_json{{"month", args.month},
                              {"bin_width", args.bin_width},
                              {"keywords", args.keywords.empty() ? "builtin" : args.keywords}},
                 std::move(inputs), outputs);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harvester community discovery from spam-event logs"};
  app.set_version_flag("--version", harvnet::kVersion);
  app.require_subcommand(1);

  PipelineArgs cluster_args, export_args;
  auto* cluster = app.add_subcommand("cluster", "cluster harvesters of one month");
  cluster_args.add_to(cluster);
  auto* exporter = app.add_subcommand("export", "write graph files (edges.tsv, nodes.tsv) for visualizers");
  export_args.add_to(exporter);

  ValidateArgs validate_args;
  auto* validate = app.add_subcommand("validate", "score a cluster CSV against ground truth or labels");
  validate->add_option("--clusters", validate_args.clusters, "cluster CSV")->required()->check(CLI::ExistingFile);
  auto* truth = validate->add_option("--truth", validate_args.truth, "synth ground_truth.json")
                    ->check(CLI::ExistingFile);
  auto* labels = validate->add_option("--labels", validate_args.labels, "CSV with harvester_ip,label columns")
                     ->check(CLI::ExistingFile);
  truth->excludes(labels);
  validate->add_option("--temporal", validate_args.temporal, "matrix dump directory (for rho_avg)")
      ->check(CLI::ExistingDirectory);
  validate->add_option("--out,-o", validate_args.out, "report path")->capture_default_str();
  validate->add_option("--prefix-bits", validate_args.prefix_bits, "IP prefix length")->capture_default_str();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic event log with planted communities");
  synth->add_option("--scenario", synth_args.scenario, "scenario config file (key = value)")
      ->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_args.seed, "override the scenario seed");
  synth->add_option("--out,-o", synth_args.out, "output directory")->capture_default_str();

  ReportArgs report_args;
  auto* report = app.add_subcommand("ingest-report", "monthly volume and phishing-level summaries");
  report->add_option("input,--input,-i", report_args.input, "event log")->required()->check(CLI::ExistingFile);
  report->add_option("--format", report_args.format, "csv or jsonl (default: from the file extension)");
  report->add_option("--addresses", report_args.addresses, "CSV month,addresses for volume normalization")
      ->check(CLI::ExistingFile);
  report->add_option("--month", report_args.month, "also profile phishing levels for this month (YYYY-MM)");
  report->add_option("--keywords", report_args.keywords, "phishing keyword file")->check(CLI::ExistingFile);
  report->add_option("--bin-width", report_args.bin_width, "histogram bin width")->capture_default_str();
  report->add_option("--out,-o", report_args.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*cluster) {
      if (!cluster_args.config.empty()) apply_config_file(cluster, cluster_args.config);
      return cmd_cluster(cluster_args, false);
    }
    if (*exporter) {
      if (!export_args.config.empty()) apply_config_file(exporter, export_args.config);
      return cmd_cluster(export_args, true);
    }
    if (*validate) {
      if (validate_args.truth.empty() && validate_args.labels.empty()) {
        throw UsageError("validate needs --truth or --labels");
      }
      return cmd_validate(validate_args);
    }
    if (*synth) return cmd_synth(synth_args);
    if (*report) return cmd_ingest_report(report_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const harvnet::EmptyWindowError& e) {
    std::cerr << "no data: " << e.what() << '\n';
    return kExitEmpty;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
  return kExitUsage;
}
