#pragma once

// Subject-keyword phishing classification and per-harvester phishing levels.

#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harvnet/ingest.hpp"

namespace harvnet {

/// Lowercase substrings whose presence marks a subject as phishing.
class KeywordList {
 public:
  KeywordList() = default;
  /// Keywords are lowercased; blanks are dropped.
  explicit KeywordList(std::vector<std::string> keywords);

  /// One keyword per line, '#' starts a comment.
  static KeywordList parse(std::istream& in);
  static KeywordList load(const std::string& path);
  /// password, account, paypal, chase, verify, bank, suspended, ...
  static KeywordList defaults();

  const std::vector<std::string>& words() const noexcept { return words_; }
  bool empty() const noexcept { return words_.empty(); }

 private:
  std::vector<std::string> words_;
};

/// True iff the ASCII case-folded subject contains any keyword. Throws
/// ConfigError on an empty keyword list.
bool classify_email(std::string_view subject, const KeywordList& keywords);

enum class PhisherLabel { kNonPhisher, kPhisher };

std::string_view to_string(PhisherLabel label);

struct PhishingProfile {
  std::size_t harvester = 0;  // row index in the window
  std::uint64_t phishing_emails = 0;
  std::uint64_t total_emails = 0;
  double phishing_level = 0.0;
  PhisherLabel label = PhisherLabel::kNonPhisher;
};

/// Phisher iff phishing / total > 1/2, decided in exact integer arithmetic.
PhisherLabel label_for(std::uint64_t phishing_emails, std::uint64_t total_emails);

/// One profile per harvester row of the window.
std::vector<PhishingProfile> phishing_profiles(const EventWindow& window, const KeywordList& keywords);

struct PhishingHistogram {
  double bin_width = 0.0;
  std::vector<std::uint64_t> counts;  // bin b covers [b*w, (b+1)*w); last bin closed at 1

  std::size_t total() const;
  /// Share of profiles with level >= threshold, computed from bins whose lower
  /// edge is at or above the threshold.
  double fraction_at_or_above(double threshold) const;
};

/// Throws ConfigError unless 0 < bin_width <= 1, InvalidInputError on empty
/// input.
PhishingHistogram phishing_level_histogram(std::span<const PhishingProfile> profiles, double bin_width);

}  // namespace harvnet
