#include "wum/core.hpp"

#include <charconv>
#include <cstdio>
#include <numeric>

namespace wum {

std::string to_string(const PageOccurrence& p) {
  return "(" + p.concept_id + "," + std::to_string(p.occurrence) + ")";
}

std::string to_string(const Wildcard& w) {
  return "[" + std::to_string(w.lower) + ";" + std::to_string(w.upper) + "]";
}

std::optional<Ratio> make_ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return Ratio{num, den};
}

Ratio parse_decimal(std::string_view text) {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  bool seen_dot = false;
  bool seen_digit = false;
  for (char c : text) {
    if (c == '.') {
      if (seen_dot) throw Error("malformed decimal literal: " + std::string(text));
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') throw Error("malformed decimal literal: " + std::string(text));
    seen_digit = true;
    if (num > (UINT64_MAX - 9) / 10 || (seen_dot && den > UINT64_MAX / 10)) {
      throw Error("decimal literal out of range: " + std::string(text));
    }
    num = num * 10 + static_cast<std::uint64_t>(c - '0');
    if (seen_dot) den *= 10;
  }
  if (!seen_digit || text.front() == '.' || text.back() == '.') {
    throw Error("malformed decimal literal: " + std::string(text));
  }
  return Ratio{num, den};
}

namespace {

bool power_of_ten_divisor(std::uint64_t den, int& digits) {
  // den | 10^k iff den = 2^a 5^b; k = max(a, b)
  int twos = 0;
  int fives = 0;
  while (den % 2 == 0) { den /= 2; ++twos; }
  while (den % 5 == 0) { den /= 5; ++fives; }
  digits = std::max(twos, fives);
  return den == 1;
}

}  // namespace

std::string format_decimal(const Ratio& r) {
  std::uint64_t g = std::gcd(r.num, r.den);
  if (g == 0) g = 1;
  std::uint64_t num = r.num / g;
  std::uint64_t den = r.den / g;
  int digits = 0;
  if (!power_of_ten_divisor(den, digits) || digits > 18) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", r.value());
    return buf;
  }
  std::uint64_t scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  auto scaled = static_cast<unsigned __int128>(num) * (scale / den);
  auto whole = static_cast<std::uint64_t>(scaled / scale);
  auto frac = static_cast<std::uint64_t>(scaled % scale);
  std::string out = std::to_string(whole);
  if (digits > 0) {
    std::string f = std::to_string(frac);
    out += "." + std::string(static_cast<std::size_t>(digits) - f.size(), '0') + f;
  }
  return out;
}

std::string format_percent(const Ratio& r) {
  // round(1000 * num / den) half-up, then insert the decimal point
  auto scaled = static_cast<unsigned __int128>(r.num) * 2000 + r.den;
  auto tenths = static_cast<std::uint64_t>(scaled / (static_cast<unsigned __int128>(r.den) * 2));
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

Ratio abs_diff(const Ratio& a, const Ratio& b) {
  auto l = static_cast<unsigned __int128>(a.num) * b.den;
  auto r = static_cast<unsigned __int128>(b.num) * a.den;
  auto diff = l > r ? l - r : r - l;
  return Ratio{static_cast<std::uint64_t>(diff), a.den * b.den};
}

std::string format_instant(Instant t) {
  using namespace std::chrono;
  auto day = floor<days>(t);
  year_month_day ymd{day};
  auto rest = t - day;
  auto h = duration_cast<hours>(rest);
  rest -= h;
  auto m = duration_cast<minutes>(rest);
  rest -= m;
  auto s = duration_cast<seconds>(rest);
  rest -= s;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02lld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(h.count()), static_cast<int>(m.count()),
                static_cast<long long>(s.count()));
  std::string out = buf;
  if (rest.count() != 0) {
    std::snprintf(buf, sizeof buf, ".%03lld", static_cast<long long>(rest.count()));
    out += buf;
  }
  return out + "Z";
}

Instant parse_instant(std::string_view text) {
  using namespace std::chrono;
  auto fail = [&] { return Error("malformed instant: " + std::string(text)); };
  auto num = [&](std::size_t pos, std::size_t len) {
    if (pos + len > text.size()) throw fail();
    int v = 0;
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc{} || p != text.data() + pos + len) throw fail();
    return v;
  };
  if (text.size() < 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text.back() != 'Z') {
    throw fail();
  }
  year_month_day ymd{year{num(0, 4)}, month{static_cast<unsigned>(num(5, 2))},
                     day{static_cast<unsigned>(num(8, 2))}};
  if (!ymd.ok()) throw fail();
  Instant t = sys_days{ymd} + hours{num(11, 2)} + minutes{num(14, 2)} + seconds{num(17, 2)};
  if (text.size() == 24 && text[19] == '.') {
    t += Millis{num(20, 3)};
  } else if (text.size() != 20) {
    throw fail();
  }
  return t;
}

}  // namespace wum
