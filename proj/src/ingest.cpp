#include "harvnet/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "harvnet/csv.hpp"

namespace harvnet {

namespace {

constexpr std::size_t kReportedOffenders = 10;

struct FieldError {
  std::string reason;
};

std::optional<std::uint64_t> parse_count(std::string_view text) {
  if (text.empty()) return std::uint64_t{0};
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

// Builds an event from its four or five textual fields; returns the reason on
// failure.
std::variant<EmailEvent, FieldError> make_event(std::string_view timestamp, std::string_view harvester,
                                                std::string_view server, std::string subject,
                                                std::string_view delta) {
  EmailEvent ev;
  const auto ts = parse_utc_timestamp(timestamp);
  if (!ts) return FieldError{"invalid timestamp '" + std::string(timestamp) + "'"};
  const auto h = Ipv4::parse(harvester);
  if (!h) return FieldError{"invalid harvester_ip '" + std::string(harvester) + "'"};
  const auto s = Ipv4::parse(server);
  if (!s) return FieldError{"invalid server_ip '" + std::string(server) + "'"};
  const auto d = parse_count(delta);
  if (!d) return FieldError{"invalid addresses_acquired_delta '" + std::string(delta) + "'"};
  ev.timestamp = *ts;
  ev.harvester_ip = *h;
  ev.server_ip = *s;
  ev.subject = std::move(subject);
  ev.addresses_acquired_delta = *d;
  return ev;
}

void finish(ParsedLog& log, std::size_t records) {
  if (records == 0 || log.malformed.empty()) return;
  const double fraction = static_cast<double>(log.malformed.size()) / static_cast<double>(records);
  if (fraction <= kMaxMalformedFraction) return;
  std::vector<MalformedLine> first(log.malformed.begin(),
                                   log.malformed.begin() +
                                       static_cast<std::ptrdiff_t>(std::min(kReportedOffenders, log.malformed.size())));
  std::ostringstream msg;
  msg << log.malformed.size() << " of " << records << " records malformed (limit 10%); first offenders:";
  for (const auto& m : first) msg << "\n  line " << m.line << ": " << m.reason;
  throw FormatError(msg.str(), std::move(first));
}

ParsedLog parse_csv(std::istream& in) {
  ParsedLog log;
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) return log;

  int col_ts = -1, col_h = -1, col_s = -1, col_subj = -1, col_delta = -1;
  for (std::size_t i = 0; i < header->fields.size(); ++i) {
    const auto& name = header->fields[i];
    const int idx = static_cast<int>(i);
    if (name == "timestamp") col_ts = idx;
    else if (name == "harvester_ip") col_h = idx;
    else if (name == "server_ip") col_s = idx;
    else if (name == "subject") col_subj = idx;
    else if (name == "addresses_acquired_delta") col_delta = idx;
  }
  if (col_ts < 0 || col_h < 0 || col_s < 0 || col_subj < 0) {
    throw FormatError("CSV header must name timestamp,harvester_ip,server_ip,subject",
                      {MalformedLine{header->line, "missing required header columns"}});
  }
  const std::size_t width = header->fields.size();

  std::size_t records = 0;
  while (auto rec = reader.next()) {
    ++records;
    if (!rec->well_formed) {
      log.malformed.push_back({rec->line, "bad CSV quoting"});
      continue;
    }
    if (rec->fields.size() != width) {
      log.malformed.push_back(
          {rec->line, "expected " + std::to_string(width) + " fields, got " + std::to_string(rec->fields.size())});
      continue;
    }
    const auto& f = rec->fields;
    auto result = make_event(f[col_ts], f[col_h], f[col_s], f[col_subj],
                             col_delta >= 0 ? std::string_view(f[col_delta]) : std::string_view{});
    if (auto* err = std::get_if<FieldError>(&result)) {
      log.malformed.push_back({rec->line, err->reason});
    } else {
      log.events.push_back(std::move(std::get<EmailEvent>(result)));
    }
  }
  finish(log, records);
  return log;
}

ParsedLog parse_jsonl(std::istream& in) {
  ParsedLog log;
  std::string line;
  std::size_t line_no = 0;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++records;
    const auto obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) {
      log.malformed.push_back({line_no, "not a JSON object"});
      continue;
    }
    auto str_field = [&](const char* key) -> std::optional<std::string> {
      const auto it = obj.find(key);
      if (it == obj.end() || !it->is_string()) return std::nullopt;
      return it->get<std::string>();
    };
    const auto ts = str_field("timestamp");
    const auto h = str_field("harvester_ip");
    const auto s = str_field("server_ip");
    const auto subj = str_field("subject");
    if (!ts || !h || !s || !subj) {
      log.malformed.push_back({line_no, "missing or non-string required field"});
      continue;
    }
    std::string delta;
    if (const auto it = obj.find("addresses_acquired_delta"); it != obj.end() && !it->is_null()) {
      if (it->is_number_unsigned()) {
        delta = std::to_string(it->get<std::uint64_t>());
      } else if (it->is_string()) {
        delta = it->get<std::string>();
      } else {
        log.malformed.push_back({line_no, "addresses_acquired_delta must be a nonnegative integer"});
        continue;
      }
    }
    auto result = make_event(*ts, *h, *s, *subj, delta);
    if (auto* err = std::get_if<FieldError>(&result)) {
      log.malformed.push_back({line_no, err->reason});
    } else {
      log.events.push_back(std::move(std::get<EmailEvent>(result)));
    }
  }
  if (in.bad()) throw IoError("error while reading event log");
  finish(log, records);
  return log;
}

}  // namespace

std::optional<LogFormat> parse_log_format(std::string_view name) {
  if (name == "csv") return LogFormat::kCsv;
  if (name == "jsonl") return LogFormat::kJsonl;
  return std::nullopt;
}

ParsedLog parse_event_log(std::istream& in, LogFormat format) {
  if (!in.good() && !in.eof()) throw IoError("event log stream is not readable");
  ParsedLog log = format == LogFormat::kCsv ? parse_csv(in) : parse_jsonl(in);
  if (in.bad()) throw IoError("error while reading event log");
  return log;
}

ParsedLog parse_event_log_file(const std::string& path, LogFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open event log '" + path + "'");
  return parse_event_log(in, format);
}

EventWindow window_by_month(std::span<const EmailEvent> events, YearMonth month, AddressScope scope) {
  EventWindow w;
  w.month = month;
  for (const auto& ev : events) {
    if (month.contains(ev.timestamp)) w.events.push_back(ev);
  }
  if (w.events.empty()) throw EmptyWindowError("no events in month " + month.to_string());
  std::stable_sort(w.events.begin(), w.events.end(),
                   [](const EmailEvent& a, const EmailEvent& b) { return a.timestamp < b.timestamp; });

  w.event_harvester.reserve(w.events.size());
  w.event_server.reserve(w.events.size());
  for (const auto& ev : w.events) {
    auto [hit, h_new] = w.harvester_index.try_emplace(ev.harvester_ip, w.harvesters.size());
    if (h_new) w.harvesters.push_back(ev.harvester_ip);
    auto [sit, s_new] = w.server_index.try_emplace(ev.server_ip, w.servers.size());
    if (s_new) w.servers.push_back(ev.server_ip);
    w.event_harvester.push_back(hit->second);
    w.event_server.push_back(sit->second);
  }

  std::vector<std::uint64_t> delta_totals(w.harvesters.size(), 0);
  if (scope == AddressScope::kWindow) {
    for (std::size_t e = 0; e < w.events.size(); ++e) {
      delta_totals[w.event_harvester[e]] += w.events[e].addresses_acquired_delta;
    }
  } else {
    for (const auto& ev : events) {
      if (const auto it = w.harvester_index.find(ev.harvester_ip); it != w.harvester_index.end()) {
        delta_totals[it->second] += ev.addresses_acquired_delta;
      }
    }
  }
  w.addresses_acquired.resize(w.harvesters.size());
  for (std::size_t i = 0; i < delta_totals.size(); ++i) {
    w.addresses_acquired[i] = delta_totals[i] > 0 ? delta_totals[i] : 1;
  }
  return w;
}

std::vector<VolumeRow> monthly_volume_report(std::span<const EmailEvent> events,
                                             const std::map<YearMonth, std::uint64_t>& addresses_by_month) {
  std::map<YearMonth, std::uint64_t> emails;
  for (const auto& ev : events) ++emails[YearMonth::of(ev.timestamp)];

  std::vector<VolumeRow> rows;
  rows.reserve(emails.size());
  for (const auto& [month, count] : emails) {
    const auto it = addresses_by_month.find(month);
    if (it == addresses_by_month.end() || it->second == 0) {
      throw ReportError("no positive address count for month " + month.to_string());
    }
    rows.push_back({month, count, it->second, static_cast<double>(count) / static_cast<double>(it->second)});
  }
  return rows;
}

std::map<YearMonth, std::uint64_t> read_address_counts(std::istream& in) {
  std::map<YearMonth, std::uint64_t> out;
  csv::Reader reader(in);
  while (auto rec = reader.next()) {
    if (rec->fields.size() != 2) {
      throw InvalidInputError("address counts line " + std::to_string(rec->line) + ": expected month,addresses");
    }
    const auto month = YearMonth::parse(rec->fields[0]);
    if (!month) {
      if (rec->line == 1 && rec->fields[0] == "month") continue;  // header
      throw InvalidInputError("address counts line " + std::to_string(rec->line) + ": bad month '" +
                              rec->fields[0] + "'");
    }
    const auto count = parse_count(rec->fields[1]);
    if (!count || rec->fields[1].empty()) {
      throw InvalidInputError("address counts line " + std::to_string(rec->line) + ": bad count '" +
                              rec->fields[1] + "'");
    }
    out[*month] = *count;
  }
  return out;
}

}  // namespace harvnet
