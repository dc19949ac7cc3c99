#pragma once

// Event-log parsing, monthly windowing and per-harvester aggregates.

#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "harvnet/error.hpp"
#include "harvnet/types.hpp"

namespace harvnet {

/// One spam email received at a trap address.
struct EmailEvent {
  UtcTime timestamp{};
  Ipv4 harvester_ip;
  Ipv4 server_ip;
  std::string subject;
  std::uint64_t addresses_acquired_delta = 0;

  bool operator==(const EmailEvent&) const = default;
};

enum class LogFormat { kCsv, kJsonl };

std::optional<LogFormat> parse_log_format(std::string_view name);

struct ParsedLog {
  std::vector<EmailEvent> events;       // file order
  std::vector<MalformedLine> malformed;  // tolerated bad records
};

/// Fraction of malformed data records above which parsing fails.
inline constexpr double kMaxMalformedFraction = 0.10;

/// Parses an event log. CSV requires a header naming at least
/// `timestamp,harvester_ip,server_ip,subject` (optionally
/// `addresses_acquired_delta`); JSONL carries one object per line with the
/// same field names. Throws FormatError if more than 10% of the data records
/// are malformed, IoError if the stream is unreadable.
ParsedLog parse_event_log(std::istream& in, LogFormat format);
ParsedLog parse_event_log_file(const std::string& path, LogFormat format);

/// Where e_i (addresses acquired by a harvester) is summed from.
enum class AddressScope {
  kWindow,   // deltas of events inside the month
  kAllTime,  // deltas of every event handed to window_by_month
};

/// Events of one calendar month with dense harvester/server indices.
struct EventWindow {
  YearMonth month;
  std::vector<EmailEvent> events;  // sorted by timestamp (stable)
  std::vector<Ipv4> harvesters;    // row index -> ip, first-appearance order
  std::vector<Ipv4> servers;       // column index -> ip, first-appearance order
  std::unordered_map<Ipv4, std::size_t> harvester_index;
  std::unordered_map<Ipv4, std::size_t> server_index;
  std::vector<std::uint64_t> addresses_acquired;  // e_i >= 1 per row
  std::vector<std::size_t> event_harvester;       // row index of each event
  std::vector<std::size_t> event_server;          // column index of each event

  std::size_t num_harvesters() const noexcept { return harvesters.size(); }
  std::size_t num_servers() const noexcept { return servers.size(); }
};

/// Keeps the events whose UTC timestamp falls in `month`. Throws
/// EmptyWindowError when there are none.
EventWindow window_by_month(std::span<const EmailEvent> events, YearMonth month,
                            AddressScope scope = AddressScope::kWindow);

struct VolumeRow {
  YearMonth month;
  std::uint64_t emails = 0;
  std::uint64_t addresses = 0;
  double ratio = 0.0;  // emails / addresses
};

/// Monthly email volume normalized by the number of addresses collected in
/// that month. Throws ReportError naming the first month that has events but
/// no positive address count.
std::vector<VolumeRow> monthly_volume_report(std::span<const EmailEvent> events,
                                             const std::map<YearMonth, std::uint64_t>& addresses_by_month);

/// Reads `month,addresses` CSV (header optional).
std::map<YearMonth, std::uint64_t> read_address_counts(std::istream& in);

}  // namespace harvnet
