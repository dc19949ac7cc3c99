#include "harvnet/types.hpp"

#include <charconv>
#include <cstdio>

namespace harvnet {

namespace {

// Parses exactly `width` decimal digits.
bool parse_fixed(std::string_view text, std::size_t pos, std::size_t width, int& out) {
  if (pos + width > text.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

}  // namespace

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  std::uint32_t value = 0;
  std::size_t pos = 0;
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (pos >= text.size() || text[pos] != '.') return std::nullopt;
      ++pos;
    }
    const std::size_t start = pos;
    unsigned part = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      part = part * 10 + static_cast<unsigned>(text[pos] - '0');
      ++pos;
      if (pos - start > 3) return std::nullopt;
    }
    if (pos == start || part > 255) return std::nullopt;
    value = (value << 8) | part;
  }
  if (pos != text.size()) return std::nullopt;
  return Ipv4{value};
}

std::string Ipv4::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (value_ >> 24) & 0xffu, (value_ >> 16) & 0xffu,
                (value_ >> 8) & 0xffu, value_ & 0xffu);
  return buf;
}

std::optional<UtcTime> parse_utc_timestamp(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SSZ
  if (text.size() != 20) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' || text[16] != ':' ||
      text[19] != 'Z') {
    return std::nullopt;
  }
  int y, mo, d, h, mi, s;
  if (!parse_fixed(text, 0, 4, y) || !parse_fixed(text, 5, 2, mo) || !parse_fixed(text, 8, 2, d) ||
      !parse_fixed(text, 11, 2, h) || !parse_fixed(text, 14, 2, mi) || !parse_fixed(text, 17, 2, s)) {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_utc_timestamp(UtcTime t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{t - day_start};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::optional<YearMonth> YearMonth::parse(std::string_view text) {
  if (text.size() != 7 || text[4] != '-') return std::nullopt;
  int y, m;
  if (!parse_fixed(text, 0, 4, y) || !parse_fixed(text, 5, 2, m)) return std::nullopt;
  if (m < 1 || m > 12) return std::nullopt;
  return YearMonth{y, static_cast<unsigned>(m)};
}

YearMonth YearMonth::of(UtcTime t) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(t)};
  return YearMonth{static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month())};
}

UtcTime YearMonth::begin() const {
  using namespace std::chrono;
  return sys_days{ym_ / 1};
}

UtcTime YearMonth::end() const {
  using namespace std::chrono;
  return sys_days{(ym_ + months{1}) / 1};
}

std::string YearMonth::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", year(), month());
  return buf;
}

}  // namespace harvnet
