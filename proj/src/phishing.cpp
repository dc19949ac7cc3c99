#include "harvnet/phishing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace harvnet {

namespace {

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Bin edges are multiples of the width; the epsilon keeps e.g. 0.3 / 0.1 in
// bin 3 despite rounding.
constexpr double kBinEps = 1e-9;

}  // namespace

KeywordList::KeywordList(std::vector<std::string> keywords) {
  for (auto& k : keywords) {
    auto word = ascii_lower(trim(k));
    if (!word.empty()) words_.push_back(std::move(word));
  }
}

KeywordList KeywordList::parse(std::istream& in) {
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto word = trim(line);
    if (!word.empty()) words.push_back(std::move(word));
  }
  return KeywordList(std::move(words));
}

KeywordList KeywordList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open keyword file '" + path + "'");
  auto list = parse(in);
  if (list.empty()) throw ConfigError("keyword file '" + path + "' contains no keywords");
  return list;
}

KeywordList KeywordList::defaults() {
  return KeywordList({"password", "account", "paypal", "chase", "verify", "bank", "suspended", "login",
                      "ebay", "security alert", "confirm your", "citibank", "wells fargo", "barclays"});
}

bool classify_email(std::string_view subject, const KeywordList& keywords) {
  if (keywords.empty()) throw ConfigError("phishing keyword list is empty");
  const std::string folded = ascii_lower(subject);
  return std::any_of(keywords.words().begin(), keywords.words().end(),
                     [&](const std::string& k) { return folded.find(k) != std::string::npos; });
}

std::string_view to_string(PhisherLabel label) {
  return label == PhisherLabel::kPhisher ? "phisher" : "non-phisher";
}

PhisherLabel label_for(std::uint64_t phishing_emails, std::uint64_t total_emails) {
  return 2 * phishing_emails > total_emails ? PhisherLabel::kPhisher : PhisherLabel::kNonPhisher;
}

std::vector<PhishingProfile> phishing_profiles(const EventWindow& window, const KeywordList& keywords) {
  if (keywords.empty()) throw ConfigError("phishing keyword list is empty");
  std::vector<PhishingProfile> profiles(window.num_harvesters());
  for (std::size_t i = 0; i < profiles.size(); ++i) profiles[i].harvester = i;
  for (std::size_t e = 0; e < window.events.size(); ++e) {
    auto& p = profiles[window.event_harvester[e]];
    ++p.total_emails;
    if (classify_email(window.events[e].subject, keywords)) ++p.phishing_emails;
  }
  for (auto& p : profiles) {
    p.phishing_level = static_cast<double>(p.phishing_emails) / static_cast<double>(p.total_emails);
    p.label = label_for(p.phishing_emails, p.total_emails);
  }
  return profiles;
}

std::size_t PhishingHistogram::total() const {
  std::size_t n = 0;
  for (const auto c : counts) n += c;
  return n;
}

double PhishingHistogram::fraction_at_or_above(double threshold) const {
  const std::size_t n = total();
  if (n == 0) return 0.0;
  std::size_t above = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    if (static_cast<double>(b) * bin_width + kBinEps >= threshold) above += counts[b];
  }
  return static_cast<double>(above) / static_cast<double>(n);
}

PhishingHistogram phishing_level_histogram(std::span<const PhishingProfile> profiles, double bin_width) {
  if (!(bin_width > 0.0 && bin_width <= 1.0)) throw ConfigError("histogram bin width must be in (0, 1]");
  if (profiles.empty()) throw InvalidInputError("cannot build a histogram of zero profiles");
  const auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil(1.0 / bin_width - kBinEps)));
  PhishingHistogram h{bin_width, std::vector<std::uint64_t>(bins, 0)};
  for (const auto& p : profiles) {
    auto b = static_cast<std::size_t>(std::floor(p.phishing_level / bin_width + kBinEps));
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

}  // namespace harvnet
