#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wum {

using Millis = std::chrono::milliseconds;
using Instant = std::chrono::sys_time<Millis>;

using ConceptId = std::string;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A (concept, k) pair: the k-th access of a concept within one session.
struct PageOccurrence {
  ConceptId concept_id;
  std::uint32_t occurrence = 1;

  friend bool operator==(const PageOccurrence&, const PageOccurrence&) = default;
  friend auto operator<=>(const PageOccurrence&, const PageOccurrence&) = default;
};

using Sequence = std::vector<PageOccurrence>;

std::string to_string(const PageOccurrence& p);

/// Gap bound between two bound elements: matched by lower..upper page
/// occurrences.
struct Wildcard {
  std::uint32_t lower = 0;
  std::uint32_t upper = 0;

  friend bool operator==(const Wildcard&, const Wildcard&) = default;
  bool admits(std::size_t gap) const { return gap >= lower && gap <= upper; }
};

std::string to_string(const Wildcard& w);

/// Exact non-negative rational built from counts. Numerator and denominator
/// are kept as given (not reduced) so reports can show the underlying counts;
/// comparison and equality are on the rational value.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Ratio& a, const Ratio& b) {
    return static_cast<unsigned __int128>(a.num) * b.den ==
           static_cast<unsigned __int128>(b.num) * a.den;
  }
  friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) {
    auto l = static_cast<unsigned __int128>(a.num) * b.den;
    auto r = static_cast<unsigned __int128>(b.num) * a.den;
    return l <=> r;
  }
};

/// num/den, or nullopt when den == 0 (undefined rather than zero).
std::optional<Ratio> make_ratio(std::uint64_t num, std::uint64_t den);

/// Parses a non-negative decimal literal ("30", "0.045") into an exact ratio
/// whose denominator is a power of ten.
Ratio parse_decimal(std::string_view text);

/// Prints a ratio whose denominator divides a power of ten as a decimal
/// literal; other ratios are printed with up to 12 fractional digits.
std::string format_decimal(const Ratio& r);

/// Percentage rounded half-up to one decimal, e.g. 29/36 -> "80.6".
std::string format_percent(const Ratio& r);

/// Absolute difference of two ratios, exact.
Ratio abs_diff(const Ratio& a, const Ratio& b);

/// ISO-8601 UTC rendering, milliseconds only when non-zero.
std::string format_instant(Instant t);
Instant parse_instant(std::string_view text);

}  // namespace wum
