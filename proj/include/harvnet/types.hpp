#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace harvnet {

/// IPv4 address stored in host byte order.
class Ipv4 {
 public:
  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t value) : value_(value) {}

  /// Strict dotted-quad parsing: four decimal octets 0..255, no whitespace,
  /// no leading '+', at most three digits per octet.
  static std::optional<Ipv4> parse(std::string_view text);

  constexpr std::uint32_t value() const noexcept { return value_; }
  std::string to_string() const;

  /// Address with the low (32 - bits) bits cleared. bits in [0, 32].
  constexpr Ipv4 masked(int bits) const noexcept {
    if (bits <= 0) return Ipv4{0};
    if (bits >= 32) return *this;
    return Ipv4{value_ & ~((std::uint32_t{1} << (32 - bits)) - 1)};
  }

  constexpr auto operator<=>(const Ipv4&) const = default;

 private:
  std::uint32_t value_ = 0;
};

using UtcTime = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DDTHH:MM:SSZ` (UTC, second precision, trailing Z required).
std::optional<UtcTime> parse_utc_timestamp(std::string_view text);
std::string format_utc_timestamp(UtcTime t);

/// Calendar month in UTC.
class YearMonth {
 public:
  constexpr YearMonth() = default;
  constexpr YearMonth(int year, unsigned month) : ym_(std::chrono::year{year}, std::chrono::month{month}) {}

  /// Parses `YYYY-MM`.
  static std::optional<YearMonth> parse(std::string_view text);
  static YearMonth of(UtcTime t);

  int year() const noexcept { return static_cast<int>(ym_.year()); }
  unsigned month() const noexcept { return static_cast<unsigned>(ym_.month()); }

  UtcTime begin() const;
  /// Exclusive end: the first instant of the following month.
  UtcTime end() const;
  bool contains(UtcTime t) const { return t >= begin() && t < end(); }
  std::chrono::seconds length() const { return end() - begin(); }

  std::string to_string() const;

  auto operator<=>(const YearMonth& other) const {
    if (auto c = year() <=> other.year(); c != 0) return c;
    return month() <=> other.month();
  }
  bool operator==(const YearMonth& other) const { return ym_ == other.ym_; }

 private:
  std::chrono::year_month ym_{std::chrono::year{1970}, std::chrono::month{1}};
};

}  // namespace harvnet

template <>
struct std::hash<harvnet::Ipv4> {
  std::size_t operator()(const harvnet::Ipv4& ip) const noexcept { return std::hash<std::uint32_t>{}(ip.value()); }
};
