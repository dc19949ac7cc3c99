#include "harvnet/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "harvnet/csv.hpp"
#include "harvnet/validation.hpp"

namespace harvnet {

namespace {

// Portable draws on top of mt19937_64, whose output sequence is fixed by the
// standard (the <random> distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, n).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  std::uint64_t in(const Range& r) { return r.lo + index(r.hi - r.lo + 1); }

  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

constexpr std::array kPhishingSubjects = {
    "Verify your PayPal account",
    "Chase Online: security alert",
    "Your bank account has been suspended",
    "Password reset required",
    "Confirm your eBay login details",
    "Wells Fargo: unusual sign-in activity",
    "Citibank account notice",
    "Barclays online banking update",
};

constexpr std::array kBenignSubjects = {
    "Cheap watches, Rolex and Omega replicas",
    "Lose 20 pounds in 20 days",
    "Hot stock pick: XYZQ set to soar",
    "Meet singles in your area",
    "Discount meds shipped overnight",
    "You have won a free cruise",
    "Best mortgage rates, apply today",
    "Re: your \"special\" offer",
};

// Benchmarking range 198.18.0.0/15: ordinary harvesters take 198.18.0.0/16,
// coordinated group g takes 198.19.(255 - g).0/24.
constexpr std::uint32_t kHarvesterBase = (198u << 24) | (18u << 16);
constexpr std::uint32_t kCoordinatedBase = (198u << 24) | (19u << 16);
// Shared address space 100.64.0.0/10 for spam servers.
constexpr std::uint32_t kServerBase = (100u << 24) | (64u << 16);
constexpr std::uint32_t kServerSpan = 1u << 22;

Ipv4 coordinated_network(std::size_t group) {
  return Ipv4{kCoordinatedBase | (static_cast<std::uint32_t>(255 - group) << 8)};
}

// Hour-bin template: a weighted set of active hours within the month.
struct HourProfile {
  std::vector<std::int64_t> hours;
  std::vector<double> cumulative;

  std::int64_t draw(Rng& rng) const {
    const double u = rng.unit() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return hours[static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                                   static_cast<std::ptrdiff_t>(hours.size()) - 1))];
  }
};

HourProfile make_profile(Rng& rng, std::int64_t month_hours, std::size_t active) {
  std::set<std::int64_t> chosen;
  while (chosen.size() < active) chosen.insert(static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(month_hours))));
  HourProfile p;
  double total = 0.0;
  for (const auto h : chosen) {
    p.hours.push_back(h);
    total += 0.5 + rng.unit();
    p.cumulative.push_back(total);
  }
  return p;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a nonnegative integer, got '" + text + "'");
  }
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  }
}

Range to_range(const std::string& key, const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos) {
    const auto v = to_uint(key, text);
    return {v, v};
  }
  return {to_uint(key, trim(text.substr(0, dash))), to_uint(key, trim(text.substr(dash + 1)))};
}

std::string range_text(const Range& r) {
  return r.lo == r.hi ? std::to_string(r.lo) : std::to_string(r.lo) + "-" + std::to_string(r.hi);
}

void check_range(const char* name, const Range& r) {
  if (r.lo < 1 || r.lo > r.hi) throw ConfigError(std::string(name) + " must be a nonempty positive range");
}

}  // namespace

void ScenarioConfig::validate() const {
  if (communities < 1) throw ConfigError("communities must be at least 1");
  check_range("harvesters_per_community", harvesters_per_community);
  check_range("emails_per_harvester", emails_per_harvester);
  check_range("addresses_per_harvester", addresses_per_harvester);
  if (servers_per_community < 1) throw ConfigError("servers_per_community must be at least 1");
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0)) {
    throw ConfigError("p_in and p_out must be probabilities");
  }
  if (p_in + p_out > 1.0 + 1e-12) throw ConfigError("p_in + p_out must not exceed 1");
  if (p_in + p_out < 1.0 - 1e-12 && global_servers < 1) {
    throw ConfigError("global_servers must be at least 1 when p_in + p_out < 1");
  }
  if (p_out > 0.0 && communities < 2) throw ConfigError("p_out > 0 needs at least two communities");
  for (const auto c : phisher_communities) {
    if (c >= communities) throw ConfigError("phisher community " + std::to_string(c) + " does not exist");
  }
  const auto month_hours = static_cast<std::size_t>(month.length() / std::chrono::hours{1});
  if (profile_hours < 1 || profile_hours > month_hours) {
    throw ConfigError("profile_hours must be in [1, hours in month]");
  }
  if (coordinated_groups.size() > 256) throw ConfigError("at most 256 coordinated groups");
  std::vector<std::uint64_t> used(communities, 0);
  for (const auto& g : coordinated_groups) {
    if (g.community >= communities) throw ConfigError("coordinated group community does not exist");
    if (g.size < 2 || g.size > 254) throw ConfigError("coordinated group size must be in [2, 254]");
    used[g.community] += g.size;
    if (used[g.community] > harvesters_per_community.lo) {
      throw ConfigError("coordinated groups exceed the harvesters of community " + std::to_string(g.community));
    }
  }
  if (jitter_seconds < 0 || jitter_seconds > 300) throw ConfigError("jitter_seconds must be in [0, 300]");
  if (!(phishing_probability_phisher >= 0.95 && phishing_probability_phisher <= 1.0)) {
    throw ConfigError("phishing_probability_phisher must be in [0.95, 1]");
  }
  if (!(phishing_probability_other >= 0.0 && phishing_probability_other < 0.05)) {
    throw ConfigError("phishing_probability_other must be in [0, 0.05)");
  }
}

ScenarioConfig parse_scenario_config(std::istream& in) {
  ScenarioConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "communities") c.communities = to_uint(key, value);
    else if (key == "harvesters_per_community") c.harvesters_per_community = to_range(key, value);
    else if (key == "servers_per_community") c.servers_per_community = to_uint(key, value);
    else if (key == "global_servers") c.global_servers = to_uint(key, value);
    else if (key == "p_in") c.p_in = to_double(key, value);
    else if (key == "p_out") c.p_out = to_double(key, value);
    else if (key == "phisher_communities") {
      c.phisher_communities.clear();
      for (const auto& part : split(value, ',')) c.phisher_communities.push_back(to_uint(key, part));
    } else if (key == "emails_per_harvester") c.emails_per_harvester = to_range(key, value);
    else if (key == "addresses_per_harvester") c.addresses_per_harvester = to_range(key, value);
    else if (key == "profile_hours") c.profile_hours = to_uint(key, value);
    else if (key == "coordinated_groups") {
      c.coordinated_groups.clear();
      for (const auto& part : split(value, ';')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos) throw ConfigError("coordinated_groups: expected community:size");
        c.coordinated_groups.push_back(
            {to_uint(key, trim(part.substr(0, colon))), to_uint(key, trim(part.substr(colon + 1)))});
      }
    } else if (key == "jitter_seconds") c.jitter_seconds = static_cast<std::int64_t>(to_uint(key, value));
    else if (key == "phishing_probability_phisher") c.phishing_probability_phisher = to_double(key, value);
    else if (key == "phishing_probability_other") c.phishing_probability_other = to_double(key, value);
    else if (key == "month") {
      const auto m = YearMonth::parse(value);
      if (!m) throw ConfigError("month: expected YYYY-MM, got '" + value + "'");
      c.month = *m;
    } else if (key == "seed") c.seed = to_uint(key, value);
    else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario config '" + path + "'");
  return parse_scenario_config(in);
}

std::string to_config_text(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "communities = " << c.communities << '\n'
      << "harvesters_per_community = " << range_text(c.harvesters_per_community) << '\n'
      << "servers_per_community = " << c.servers_per_community << '\n'
      << "global_servers = " << c.global_servers << '\n'
      << "p_in = " << c.p_in << '\n'
      << "p_out = " << c.p_out << '\n'
      << "phisher_communities = ";
  for (std::size_t i = 0; i < c.phisher_communities.size(); ++i) out << (i ? "," : "") << c.phisher_communities[i];
  out << '\n'
      << "emails_per_harvester = " << range_text(c.emails_per_harvester) << '\n'
      << "addresses_per_harvester = " << range_text(c.addresses_per_harvester) << '\n'
      << "profile_hours = " << c.profile_hours << '\n'
      << "coordinated_groups = ";
  for (std::size_t i = 0; i < c.coordinated_groups.size(); ++i) {
    out << (i ? ";" : "") << c.coordinated_groups[i].community << ':' << c.coordinated_groups[i].size;
  }
  out << '\n'
      << "jitter_seconds = " << c.jitter_seconds << '\n'
      << "phishing_probability_phisher = " << c.phishing_probability_phisher << '\n'
      << "phishing_probability_other = " << c.phishing_probability_other << '\n'
      << "month = " << c.month.to_string() << '\n'
      << "seed = " << c.seed << '\n';
  return out.str();
}

Scenario generate_scenario(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  Scenario scenario;
  GroundTruth& truth = scenario.truth;
  const std::int64_t month_hours = config.month.length() / std::chrono::hours{1};
  const UtcTime start = config.month.begin();
  const UtcTime last = config.month.end() - std::chrono::seconds{1};

  // Servers: one pool per community plus the global pool, unique addresses.
  std::unordered_set<std::uint32_t> taken;
  auto fresh_server = [&] {
    std::uint32_t ip;
    do {
      ip = kServerBase | static_cast<std::uint32_t>(rng.index(kServerSpan));
    } while (!taken.insert(ip).second);
    return Ipv4{ip};
  };
  std::vector<std::vector<Ipv4>> pools(config.communities);
  for (auto& pool : pools) {
    for (std::size_t s = 0; s < config.servers_per_community; ++s) pool.push_back(fresh_server());
  }
  std::vector<Ipv4> global_pool;
  for (std::size_t s = 0; s < config.global_servers; ++s) global_pool.push_back(fresh_server());

  std::vector<HourProfile> profiles;
  for (std::size_t c = 0; c < config.communities; ++c) {
    profiles.push_back(make_profile(rng, month_hours, config.profile_hours));
  }

  // Harvesters, community by community. Coordinated members come first in
  // their community and live in their group's /24.
  std::vector<std::vector<std::size_t>> group_slots(config.communities);
  for (std::size_t g = 0; g < config.coordinated_groups.size(); ++g) {
    group_slots[config.coordinated_groups[g].community].push_back(g);
  }
  for (std::size_t g = 0; g < config.coordinated_groups.size(); ++g) {
    truth.groups.push_back({g, config.coordinated_groups[g].community, prefix_label(coordinated_network(g), 24), {}});
  }
  std::unordered_set<std::uint32_t> harvester_taken;
  for (std::size_t c = 0; c < config.communities; ++c) {
    const auto count = rng.in(config.harvesters_per_community);
    const bool phishing = std::find(config.phisher_communities.begin(), config.phisher_communities.end(), c) !=
                          config.phisher_communities.end();
    std::vector<int> member_group;
    for (const auto g : group_slots[c]) {
      member_group.insert(member_group.end(), config.coordinated_groups[g].size, static_cast<int>(g));
    }
    for (std::uint64_t h = 0; h < count; ++h) {
      const int group = h < member_group.size() ? member_group[h] : -1;
      std::uint32_t ip;
      do {
        if (group >= 0) {
          ip = coordinated_network(static_cast<std::size_t>(group)).value() | static_cast<std::uint32_t>(1 + rng.index(254));
        } else {
          ip = kHarvesterBase | static_cast<std::uint32_t>(rng.index(1u << 16));
        }
      } while (!harvester_taken.insert(ip).second);
      if (group >= 0) truth.groups[static_cast<std::size_t>(group)].members.push_back(truth.harvesters.size());
      truth.harvesters.push_back(Ipv4{ip});
      truth.community.push_back(c);
      truth.phisher.push_back(phishing);
      truth.coordinated_group.push_back(group);
    }
  }

  // Shared emission schedules of coordinated groups.
  std::vector<std::vector<std::int64_t>> schedules(config.coordinated_groups.size());
  for (std::size_t g = 0; g < schedules.size(); ++g) {
    const auto n = rng.in(config.emails_per_harvester);
    const auto& profile = profiles[config.coordinated_groups[g].community];
    for (std::uint64_t e = 0; e < n; ++e) {
      schedules[g].push_back(profile.draw(rng) * 3600 + static_cast<std::int64_t>(rng.index(3600)));
    }
  }

  auto pick_server = [&](std::size_t community) {
    const double u = rng.unit();
    if (u < config.p_in) return pools[community][rng.index(pools[community].size())];
    if (u < config.p_in + config.p_out) {
      auto other = rng.index(config.communities - 1);
      if (other >= community) ++other;
      return pools[other][rng.index(pools[other].size())];
    }
    return global_pool[rng.index(global_pool.size())];
  };

  std::vector<std::uint64_t> addresses(truth.harvesters.size());
  for (std::size_t i = 0; i < truth.harvesters.size(); ++i) {
    const auto c = truth.community[i];
    addresses[i] = rng.in(config.addresses_per_harvester);
    const double phish_p =
        truth.phisher[i] ? config.phishing_probability_phisher : config.phishing_probability_other;
    auto emit = [&](std::int64_t offset) {
      EmailEvent ev;
      ev.timestamp = std::clamp(start + std::chrono::seconds{offset}, start, last);
      ev.harvester_ip = truth.harvesters[i];
      ev.server_ip = pick_server(c);
      ev.subject = rng.chance(phish_p) ? kPhishingSubjects[rng.index(kPhishingSubjects.size())]
                                       : kBenignSubjects[rng.index(kBenignSubjects.size())];
      scenario.events.push_back(std::move(ev));
    };
    if (const int g = truth.coordinated_group[i]; g >= 0) {
      const auto span = static_cast<std::uint64_t>(2 * config.jitter_seconds + 1);
      for (const auto t : schedules[static_cast<std::size_t>(g)]) {
        emit(t + static_cast<std::int64_t>(rng.index(span)) - config.jitter_seconds);
      }
    } else {
      const auto n = rng.in(config.emails_per_harvester);
      for (std::uint64_t e = 0; e < n; ++e) {
        emit(profiles[c].draw(rng) * 3600 + static_cast<std::int64_t>(rng.index(3600)));
      }
    }
  }

  std::sort(scenario.events.begin(), scenario.events.end(), [](const EmailEvent& a, const EmailEvent& b) {
    return std::tie(a.timestamp, a.harvester_ip, a.server_ip, a.subject) <
           std::tie(b.timestamp, b.harvester_ip, b.server_ip, b.subject);
  });
  // Each harvester's address count rides on its chronologically first email.
  std::unordered_map<Ipv4, std::size_t> index;
  for (std::size_t i = 0; i < truth.harvesters.size(); ++i) index.emplace(truth.harvesters[i], i);
  std::vector<bool> seen(truth.harvesters.size(), false);
  for (auto& ev : scenario.events) {
    const auto i = index.at(ev.harvester_ip);
    if (!seen[i]) {
      seen[i] = true;
      ev.addresses_acquired_delta = addresses[i];
    }
  }
  return scenario;
}

void write_events_csv(std::ostream& out, const std::vector<EmailEvent>& events) {
  out << "timestamp,harvester_ip,server_ip,subject,addresses_acquired_delta\n";
  for (const auto& ev : events) {
    out << format_utc_timestamp(ev.timestamp) << ',' << ev.harvester_ip.to_string() << ','
        << ev.server_ip.to_string() << ',' << csv::escape(ev.subject) << ',' << ev.addresses_acquired_delta << '\n';
  }
}

nlohmann::json to_json(const GroundTruth& truth, const ScenarioConfig& config) {
  nlohmann::json j;
  j["seed"] = config.seed;
  j["month"] = config.month.to_string();
  j["communities"] = config.communities;
  auto& harvesters = j["harvesters"] = nlohmann::json::array();
  for (std::size_t i = 0; i < truth.harvesters.size(); ++i) {
    harvesters.push_back({{"ip", truth.harvesters[i].to_string()},
                          {"community", truth.community[i]},
                          {"phisher", static_cast<bool>(truth.phisher[i])},
                          {"coordinated_group", truth.coordinated_group[i]}});
  }
  auto& groups = j["coordinated_groups"] = nlohmann::json::array();
  for (const auto& g : truth.groups) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto m : g.members) members.push_back(truth.harvesters[m].to_string());
    groups.push_back({{"id", g.id}, {"community", g.community}, {"prefix", g.prefix}, {"members", members}});
  }
  return j;
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  GroundTruth truth;
  try {
    std::unordered_map<Ipv4, std::size_t> index;
    for (const auto& h : j.at("harvesters")) {
      const auto ip = Ipv4::parse(h.at("ip").get<std::string>());
      if (!ip) throw InvalidInputError("ground truth: invalid harvester address");
      index.emplace(*ip, truth.harvesters.size());
      truth.harvesters.push_back(*ip);
      truth.community.push_back(h.at("community").get<std::size_t>());
      truth.phisher.push_back(h.at("phisher").get<bool>());
      truth.coordinated_group.push_back(h.value("coordinated_group", -1));
    }
    if (j.contains("coordinated_groups")) {
      for (const auto& g : j.at("coordinated_groups")) {
        CoordinatedGroup group{g.at("id").get<std::size_t>(), g.at("community").get<std::size_t>(),
                               g.value("prefix", std::string{}), {}};
        for (const auto& m : g.at("members")) {
          const auto ip = Ipv4::parse(m.get<std::string>());
          const auto it = ip ? index.find(*ip) : index.end();
          if (it == index.end()) throw InvalidInputError("ground truth: group member is not a listed harvester");
          group.members.push_back(it->second);
        }
        truth.groups.push_back(std::move(group));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("ground truth: ") + e.what());
  }
  return truth;
}

}  // namespace harvnet
