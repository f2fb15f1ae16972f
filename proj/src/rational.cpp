#include "mmtm/rational.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmtm/error.hpp"

namespace mmtm {
namespace {

using i128 = __int128;

std::int64_t narrow(i128 value) {
  if (value > std::numeric_limits<std::int64_t>::max() ||
      value < -static_cast<i128>(std::numeric_limits<std::int64_t>::max())) {
    throw Error(ErrorKind::Overflow, "rational component exceeds 64 bits");
  }
  return static_cast<std::int64_t>(value);
}

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Rational make_reduced(i128 num, i128 den) {
  if (den == 0) throw Error(ErrorKind::DivisionByZero, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  i128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational(narrow(num), narrow(den));
}

}  // namespace

Rational::Rational(std::int64_t numerator, std::int64_t denominator) {
  if (denominator == 0) throw Error(ErrorKind::DivisionByZero, "zero denominator");
  i128 num = numerator;
  i128 den = denominator;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  i128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  num_ = narrow(num);
  den_ = narrow(den);
}

std::optional<Rational> Rational::parse(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool negative = false;
  std::size_t pos = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    pos = 1;
  }
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    auto n = parse(text.substr(0, slash));
    auto d = parse(text.substr(slash + 1));
    if (!n || !d || !n->is_integer() || !d->is_integer() || d->is_zero()) return std::nullopt;
    return *n / *d;
  }
  i128 num = 0;
  i128 den = 1;
  bool seen_dot = false;
  bool seen_digit = false;
  constexpr i128 kLimit = static_cast<i128>(1) << 100;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
    } else if (c >= '0' && c <= '9') {
      seen_digit = true;
      num = num * 10 + (c - '0');
      if (seen_dot) den *= 10;
      if (num > kLimit || den > kLimit) return std::nullopt;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit) return std::nullopt;
  try {
    return make_reduced(negative ? -num : num, den);
  } catch (const Error&) {
    return std::nullopt;
  }
}

Rational Rational::from_double(double value) {
  if (!std::isfinite(value)) throw Error(ErrorKind::Overflow, "non-finite value");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  if (ec == std::errc()) {
    if (auto r = parse(std::string_view(buf, end - buf))) return *r;
  }
  throw Error(ErrorKind::Overflow, "value not representable as a 64-bit fraction");
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

std::string Rational::to_decimal() const {
  if (den_ == 1) return std::to_string(num_);
  std::int64_t d = den_;
  int twos = 0;
  int fives = 0;
  while (d % 2 == 0) { d /= 2; ++twos; }
  while (d % 5 == 0) { d /= 5; ++fives; }
  if (d != 1) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), to_double());
    return std::string(buf, end);
  }
  // den = 2^a 5^b, so scaling by 10^max(a,b) gives an exact integer.
  int digits = std::max(twos, fives);
  i128 scaled = static_cast<i128>(num_);
  i128 scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  scaled = scaled * (scale / den_);
  bool negative = scaled < 0;
  if (negative) scaled = -scaled;
  std::string body;
  for (i128 v = scaled; v > 0 || body.size() <= static_cast<std::size_t>(digits); v /= 10) {
    body.insert(body.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
  }
  body.insert(body.end() - digits, '.');
  return negative ? "-" + body : body;
}

Rational operator+(const Rational& a, const Rational& b) {
  return make_reduced(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                      static_cast<i128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return make_reduced(static_cast<i128>(a.num_) * b.den_ - static_cast<i128>(b.num_) * a.den_,
                      static_cast<i128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return make_reduced(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw Error(ErrorKind::DivisionByZero, "division by zero");
  return make_reduced(static_cast<i128>(a.num_) * b.den_, static_cast<i128>(a.den_) * b.num_);
}

Rational Rational::operator-() const { return Rational(-num_, den_); }

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  i128 lhs = static_cast<i128>(a.num_) * b.den_;
  i128 rhs = static_cast<i128>(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

}  // namespace mmtm

namespace mmtm {

bool answers_match(const Rational& predicted, const Rational& gold, double rel_tol) {
  if (predicted == gold) return true;
  double g = gold.to_double();
  return std::abs(predicted.to_double() - g) <= rel_tol * std::max(1.0, std::abs(g));
}

}  // namespace mmtm
