#pragma once

// Minimal RFC 4180 style CSV reading/writing.

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace harvnet::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line on which the record starts
  bool well_formed = true;  // false on an unterminated quote or stray quote
};

/// Streams records; quoted fields may contain commas, doubled quotes and
/// newlines. Both LF and CRLF line endings are accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next non-blank record, or nullopt at end of input.
  std::optional<Record> next();

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Joins fields with commas, escaping each.
std::string join(const std::vector<std::string>& fields);

}  // namespace harvnet::csv
