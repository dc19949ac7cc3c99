#include "harvnet/csv.hpp"

namespace harvnet::csv {

std::optional<Record> Reader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    Record rec;
    rec.line = line_;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::size_t i = 0;
    while (true) {
      if (i == line.size()) {
        if (!in_quotes) break;
        // Quoted field continues on the next physical line.
        std::string more;
        if (!std::getline(in_, more)) {
          rec.well_formed = false;
          break;
        }
        ++line_;
        if (!more.empty() && more.back() == '\r') more.pop_back();
        field.push_back('\n');
        line = std::move(more);
        i = 0;
        continue;
      }
      const char c = line[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
      } else if (c == '"') {
        if (field.empty() && !field_was_quoted) {
          in_quotes = true;
          field_was_quoted = true;
        } else {
          rec.well_formed = false;
          field.push_back(c);
        }
      } else {
        if (field_was_quoted) rec.well_formed = false;
        field.push_back(c);
      }
      ++i;
    }
    rec.fields.push_back(std::move(field));
    return rec;
  }
  return std::nullopt;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

}  // namespace harvnet::csv
