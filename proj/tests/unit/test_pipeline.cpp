#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "harvnet/pipeline.hpp"
#include "support.hpp"

using namespace harvnet;
namespace fs = std::filesystem;

namespace {

std::vector<ClusterAssignment> assignments(const PipelineResult& r) {
  std::vector<ClusterAssignment> out;
  for (std::size_t i = 0; i < r.window.harvesters.size(); ++i) {
    out.push_back({r.window.harvesters[i], r.clustering.component_of[i], r.clustering.partition.assignment[i]});
  }
  return out;
}

fs::path scratch(const char* name) {
  const auto dir = fs::temp_directory_path() / ("harvnet_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("planted communities are recovered end to end") {
  ScenarioConfig cfg;
  cfg.coordinated_groups = {{2, 10}};
  const auto s = generate_scenario(cfg);
  PipelineConfig pc;
  const auto r = run_pipeline(s.events, pc, KeywordList::defaults());
  CHECK(r.window.num_harvesters() == 200);
  CHECK(r.k_choice.satisfied);
  CHECK(r.clustering.partition.k == 5);
  const auto report = validate_against_truth(assignments(r), s.truth);
  CHECK(report.adjusted_rand >= 0.9);
  CHECK(report.labels_source == "ground_truth.community");
}

TEST_CASE("a single community yields one cluster") {
  ScenarioConfig cfg;
  cfg.communities = 1;
  cfg.p_in = 1.0;
  cfg.p_out = 0.0;
  cfg.phisher_communities = {};
  const auto s = generate_scenario(cfg);
  const auto r = run_pipeline(s.events, PipelineConfig{}, KeywordList::defaults());
  CHECK(r.clustering.partition.k == 1);
}

TEST_CASE("single harvester month") {
  const std::vector<EmailEvent> events{testing::event("2006-10-03T00:00:00Z", "1.1.1.1", "9.9.9.9"),
                                       testing::event("2006-10-04T00:00:00Z", "1.1.1.1", "9.9.9.8")};
  const auto r = run_pipeline(events, PipelineConfig{}, KeywordList::defaults());
  CHECK(r.clustering.partition.k == 1);
  CHECK(r.clustering.partition.assignment == std::vector<std::size_t>{0});
}

TEST_CASE("empty month propagates the empty-window error") {
  const std::vector<EmailEvent> events{testing::event("2006-09-03T00:00:00Z", "1.1.1.1", "9.9.9.9")};
  CHECK_THROWS_AS(run_pipeline(events, PipelineConfig{}, KeywordList::defaults()), EmptyWindowError);
}

TEST_CASE("cluster CSV output is identical across runs and thread counts") {
  ScenarioConfig cfg;
  cfg.harvesters_per_community = {30, 50};
  cfg.seed = 5;
  const auto s = generate_scenario(cfg);
  std::string first;
  for (const std::size_t threads : {1, 1, 2, 4}) {
    PipelineConfig pc;
    pc.threads = threads;
    const auto r = run_pipeline(s.events, pc, KeywordList::defaults());
    std::ostringstream out;
    write_cluster_csv(out, r.window.harvesters, r.clustering);
    if (first.empty()) first = out.str();
    CHECK(out.str() == first);
  }
}

TEST_CASE("temporal similarity and explicit k") {
  ScenarioConfig cfg;
  cfg.harvesters_per_community = {20, 20};
  const auto s = generate_scenario(cfg);
  PipelineConfig pc;
  pc.similarity = CoincidenceKind::kTemporal;
  pc.k = 3;
  const auto r = run_pipeline(s.events, pc, KeywordList::defaults());
  CHECK(r.graph.k == 3);
  CHECK(r.coincidence.kind == CoincidenceKind::kTemporal);
  CHECK(r.coincidence.cols() == 744);
}

TEST_CASE("cluster CSV round-trip and validation invariances") {
  ScenarioConfig cfg;
  cfg.coordinated_groups = {{0, 10}};
  const auto s = generate_scenario(cfg);
  const auto r = run_pipeline(s.events, PipelineConfig{}, KeywordList::defaults());
  std::stringstream csv;
  write_cluster_csv(csv, r.window.harvesters, r.clustering);
  const auto read = read_cluster_csv(csv);
  REQUIRE(read.size() == r.window.num_harvesters());
  for (std::size_t i = 0; i < read.size(); ++i) {
    CHECK(read[i].harvester == r.window.harvesters[i]);
    CHECK(read[i].cluster == r.clustering.partition.assignment[i]);
  }

  const auto dir = scratch("dump");
  write_matrix_dump(dir, r);
  const auto dump = read_temporal_dump(dir);
  CHECK(dump.rows == r.window.harvesters);
  CHECK(Eigen::MatrixXd(dump.h) == Eigen::MatrixXd(r.temporal.entries));

  const auto base = validate_against_truth(read, s.truth, &dump);
  REQUIRE(base.rho_avg.count("group:0"));
  CHECK(base.rho_avg.at("group:0") >= 0.95);
  const auto base_json = to_json(base).dump();

  // Shuffled ids and shuffled rows give the identical report.
  auto shuffled = read;
  std::mt19937_64 rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto& a : shuffled) a.cluster = 100 + (a.cluster * 7) % 11;
  CHECK(to_json(validate_against_truth(shuffled, s.truth, &dump)).dump() == base_json);

  // Perfect recovery scores 1.
  std::vector<ClusterAssignment> perfect;
  for (std::size_t i = 0; i < s.truth.harvesters.size(); ++i) {
    perfect.push_back({s.truth.harvesters[i], 0, s.truth.community[i]});
  }
  const auto ideal = validate_against_truth(perfect, s.truth);
  CHECK(ideal.rand == 1.0);
  CHECK(ideal.adjusted_rand == 1.0);

  // Node-set mismatch names the first missing harvester.
  auto missing = read;
  const auto dropped = missing.back().harvester;
  missing.pop_back();
  try {
    validate_against_truth(missing, s.truth);
    FAIL("expected InvalidInputError");
  } catch (const InvalidInputError& e) {
    CHECK(std::string(e.what()).find(dropped.to_string()) != std::string::npos);
  }
  auto extra = read;
  extra.push_back({testing::ip("203.0.113.9"), 0, 0});
  CHECK_THROWS_WITH_AS(validate_against_truth(extra, s.truth), doctest::Contains("203.0.113.9"), InvalidInputError);
  fs::remove_all(dir);
}

TEST_CASE("label files") {
  std::istringstream labels("harvester_ip,label\n10.0.0.1,phisher\n10.0.0.2,non-phisher\n10.0.0.3,phisher\n");
  const auto table = read_label_csv(labels);
  const std::vector<ClusterAssignment> clusters{
      {testing::ip("10.0.0.3"), 0, 4}, {testing::ip("10.0.0.1"), 0, 4}, {testing::ip("10.0.0.2"), 0, 9}};
  const auto report = validate_against_labels(clusters, table);
  CHECK(report.rand == 1.0);
  REQUIRE(report.clusters.size() == 2);
  CHECK(report.clusters[0].phishing_cluster);
}
