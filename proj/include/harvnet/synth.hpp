#pragma once

// Synthetic spam-event logs with planted harvester communities.

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "harvnet/ingest.hpp"

namespace harvnet {

/// Inclusive integer range.
struct Range {
  std::uint64_t lo = 1;
  std::uint64_t hi = 1;
};

struct CoordinatedGroupSpec {
  std::size_t community = 0;
  std::size_t size = 10;
};

struct ScenarioConfig {
  std::size_t communities = 5;
  Range harvesters_per_community{40, 40};
  std::size_t servers_per_community = 10;
  std::size_t global_servers = 20;      // receives the 1 - p_in - p_out mass
  double p_in = 0.8;                    // email goes through the own community's pool
  double p_out = 0.05;                  // email borrows another community's pool
  std::vector<std::size_t> phisher_communities{0, 1};
  Range emails_per_harvester{200, 200};
  Range addresses_per_harvester{1, 20};
  std::size_t profile_hours = 96;  // active hours in each community's activity template
  std::vector<CoordinatedGroupSpec> coordinated_groups;
  std::int64_t jitter_seconds = 300;
  double phishing_probability_phisher = 0.98;
  double phishing_probability_other = 0.01;
  YearMonth month{2006, 10};
  std::uint64_t seed = 1;

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;
};

/// `key = value` lines, '#' comments. Ranges are `40` or `30-50`, lists are
/// comma separated, coordinated groups are `community:size` separated by ';'.
/// Unknown keys are rejected.
ScenarioConfig parse_scenario_config(std::istream& in);
ScenarioConfig load_scenario_config(const std::string& path);
std::string to_config_text(const ScenarioConfig& config);

struct CoordinatedGroup {
  std::size_t id = 0;
  std::size_t community = 0;
  std::string prefix;                // /24 label shared by the members
  std::vector<std::size_t> members;  // harvester indices
};

struct GroundTruth {
  std::vector<Ipv4> harvesters;
  std::vector<std::size_t> community;
  std::vector<bool> phisher;
  std::vector<int> coordinated_group;  // -1 when not coordinated
  std::vector<CoordinatedGroup> groups;
};

struct Scenario {
  std::vector<EmailEvent> events;  // sorted by timestamp, then addresses and subject
  GroundTruth truth;
};

/// Deterministic in config.seed, on every platform.
Scenario generate_scenario(const ScenarioConfig& config);

/// CSV with header `timestamp,harvester_ip,server_ip,subject,addresses_acquired_delta`.
void write_events_csv(std::ostream& out, const std::vector<EmailEvent>& events);

nlohmann::json to_json(const GroundTruth& truth, const ScenarioConfig& config);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

}  // namespace harvnet
