#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "harvnet/error.hpp"
#include "harvnet/pipeline.hpp"
#include "harvnet/version.hpp"

namespace py = pybind11;
using namespace harvnet;

namespace {

// nlohmann::json -> Python objects through the json module.
py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<std::string> ip_strings(std::span<const Ipv4> ips) {
  std::vector<std::string> out;
  out.reserve(ips.size());
  for (const auto& ip : ips) out.push_back(ip.to_string());
  return out;
}

LogFormat format_from(const std::string& name) {
  const auto f = parse_log_format(name);
  if (!f) throw ConfigError("unknown log format '" + name + "'");
  return *f;
}

PipelineConfig make_config(const std::string& month, const std::string& similarity, std::optional<std::size_t> k,
                           std::optional<std::size_t> big_k, std::size_t k_max, double lambda_floor,
                           std::size_t min_component_size, std::size_t threads) {
  PipelineConfig c;
  const auto m = YearMonth::parse(month);
  if (!m) throw ConfigError("month: expected YYYY-MM, got '" + month + "'");
  c.month = *m;
  const auto kind = parse_coincidence_kind(similarity);
  if (!kind) throw ConfigError("unknown similarity '" + similarity + "'");
  c.similarity = *kind;
  c.k = k;
  c.cluster.k = big_k;
  c.cluster.k_max = k_max;
  c.cluster.lambda_floor = lambda_floor;
  c.cluster.min_component_size = min_component_size;
  c.cluster.threads = threads;
  c.threads = threads;
  return c;
}

py::dict result_dict(const PipelineResult& r) {
  py::dict d;
  d["harvesters"] = ip_strings(r.window.harvesters);
  d["clusters"] = r.clustering.partition.assignment;
  d["components"] = r.clustering.component_of;
  d["k"] = r.graph.k;
  d["num_clusters"] = r.clustering.partition.k;
  std::vector<double> levels;
  std::vector<std::string> labels;
  for (const auto& p : r.profiles) {
    levels.push_back(p.phishing_level);
    labels.emplace_back(to_string(p.label));
  }
  d["phishing_level"] = levels;
  d["labels"] = labels;
  d["s_prime"] = r.similarity.s_prime;
  d["report"] = to_python(to_json(r.report));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Harvester community detection by normalized-association spectral clustering";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InvalidInputError>(m, "InvalidInputError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<EmptyWindowError>(m, "EmptyWindowError", base.ptr());
  py::register_exception<ReportError>(m, "ReportError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<DegeneratePartitionError>(m, "DegeneratePartitionError", base.ptr());

  m.def(
      "rand_index",
      [](const std::vector<std::size_t>& labels, const std::vector<std::size_t>& clusters) {
        return rand_index(pair_counts(labels, clusters));
      },
      py::arg("labels"), py::arg("clusters"));
  m.def(
      "adjusted_rand_index",
      [](const std::vector<std::size_t>& labels, const std::vector<std::size_t>& clusters) {
        return adjusted_rand_index(labels, clusters);
      },
      py::arg("labels"), py::arg("clusters"));

  m.def(
      "similarity",
      [](const Eigen::MatrixXd& h) {
        CoincidenceMatrix c;
        c.entries = h.sparseView();
        c.harvesters.resize(static_cast<std::size_t>(h.rows()));
        for (std::size_t i = 0; i < c.harvesters.size(); ++i) c.harvesters[i] = Ipv4{static_cast<std::uint32_t>(i)};
        return similarity_from_coincidence(c).s_prime;
      },
      py::arg("h"), "Normalized similarity S' of a dense coincidence matrix H.");

  m.def("default_k", &default_k, py::arg("num_nodes"));
  m.def(
      "knn_graph",
      [](const Eigen::MatrixXd& s_prime, std::size_t k) { return Eigen::MatrixXd(knn_graph(s_prime, k).w); },
      py::arg("s_prime"), py::arg("k"), "Dense weight matrix of the union k-NN graph.");
  m.def(
      "connected_components",
      [](const Eigen::MatrixXd& w) { return connected_components(SparseMatrix(w.sparseView())).label; },
      py::arg("w"));

  m.def(
      "eigengap_choose_k",
      [](const std::vector<double>& eigenvalues, std::size_t k_max, double lambda_floor) {
        return eigengap_choose_k(Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(),
                                                                  static_cast<Eigen::Index>(eigenvalues.size())),
                                 k_max, lambda_floor);
      },
      py::arg("eigenvalues"), py::arg("k_max"), py::arg("lambda_floor") = kDefaultLambdaFloor);
  m.def(
      "spectral_partition",
      [](const Eigen::MatrixXd& w, std::size_t k) {
        return spectral_partition(SparseMatrix(w.sparseView()), k).assignment;
      },
      py::arg("w"), py::arg("k"), "Partition a connected weighted graph into k clusters.");
  m.def(
      "cluster",
      [](const Eigen::MatrixXd& w, std::optional<std::size_t> k, std::size_t k_max, double lambda_floor,
         std::size_t min_component_size) {
        AdjacencyGraph g;
        g.w = w.sparseView();
        g.components = connected_components(g.w);
        ClusterOptions o;
        o.k = k;
        o.k_max = k_max;
        o.lambda_floor = lambda_floor;
        o.min_component_size = min_component_size;
        return cluster(g, o).partition.assignment;
      },
      py::arg("w"), py::arg("k") = py::none(), py::arg("k_max") = 100,
      py::arg("lambda_floor") = kDefaultLambdaFloor, py::arg("min_component_size") = 10,
      "Cluster every connected component of a weighted graph.");
  m.def(
      "knassoc",
      [](const Eigen::MatrixXd& w, const std::vector<std::size_t>& assignment) {
        Partition p;
        p.assignment = assignment;
        for (auto a : assignment) p.k = std::max(p.k, a + 1);
        return knassoc(SparseMatrix(w.sparseView()), p);
      },
      py::arg("w"), py::arg("assignment"));

  m.def(
      "synth",
      [](const std::string& scenario, std::optional<std::uint64_t> seed) {
        std::istringstream in(scenario);
        auto config = parse_scenario_config(in);
        if (seed) config.seed = *seed;
        const auto s = generate_scenario(config);
        std::ostringstream events;
        write_events_csv(events, s.events);
        return py::make_tuple(events.str(), to_python(to_json(s.truth, config)));
      },
      py::arg("scenario") = "", py::arg("seed") = py::none(),
      "Generate (events CSV text, ground truth dict) from `key = value` scenario text.");

  m.def(
      "run_pipeline",
      [](const std::string& events, const std::string& month, const std::string& format,
         const std::string& similarity, std::optional<std::size_t> k, std::optional<std::size_t> big_k,
         std::size_t k_max, double lambda_floor, std::size_t min_component_size, std::size_t threads) {
        std::istringstream in(events);
        const auto log = parse_event_log(in, format_from(format));
        const auto config = make_config(month, similarity, k, big_k, k_max, lambda_floor, min_component_size, threads);
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(log.events, config, KeywordList::defaults());
        }
        return result_dict(r);
      },
      py::arg("events"), py::arg("month"), py::arg("format") = "csv", py::arg("similarity") = "server-usage",
      py::arg("k") = py::none(), py::arg("K") = py::none(), py::arg("K_max") = 100,
      py::arg("lambda_floor") = kDefaultLambdaFloor, py::arg("min_component_size") = 10, py::arg("threads") = 1,
      "Run the full pipeline on event log text for one month.");

  m.def(
      "validate",
      [](const std::vector<std::string>& harvesters, const std::vector<std::size_t>& clusters,
         const py::dict& truth) {
        if (harvesters.size() != clusters.size()) throw InvalidInputError("harvesters and clusters differ in length");
        std::vector<ClusterAssignment> rows;
        for (std::size_t i = 0; i < harvesters.size(); ++i) {
          const auto ip = Ipv4::parse(harvesters[i]);
          if (!ip) throw InvalidInputError("invalid harvester address '" + harvesters[i] + "'");
          rows.push_back({*ip, 0, clusters[i]});
        }
        const std::string text = py::str(py::module_::import("json").attr("dumps")(truth));
        const auto gt = ground_truth_from_json(nlohmann::json::parse(text));
        return to_python(to_json(validate_against_truth(rows, gt)));
      },
      py::arg("harvesters"), py::arg("clusters"), py::arg("truth"),
      "Score cluster assignments against a synth ground truth dict.");
}
