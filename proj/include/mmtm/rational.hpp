#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mmtm {

/// Exact fraction over 64-bit integers, always reduced with a positive
/// denominator. Arithmetic that would overflow throws Error(Overflow).
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t value) : num_(value) {}  // NOLINT(implicit)
  Rational(std::int64_t numerator, std::int64_t denominator);

  /// Parses "12", "2.5", "-0.75", "3/4". Returns nullopt on anything else.
  static std::optional<Rational> parse(std::string_view text);

  /// Nearest fraction to a double by way of its shortest round-trip decimal.
  static Rational from_double(double value);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  bool is_zero() const { return num_ == 0; }
  bool is_integer() const { return den_ == 1; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// "5", "-5/2".
  std::string to_string() const;
  /// Shortest decimal: "2.5", "100", "0.125". Non-terminating fractions fall
  /// back to the shortest round-trip rendering of to_double().
  std::string to_decimal() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  /// Throws Error(DivisionByZero) when b is zero.
  friend Rational operator/(const Rational& a, const Rational& b);
  Rational operator-() const;

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace mmtm

namespace mmtm {

/// Answer comparison used for corpus validation and scoring:
/// |a - b| <= rel_tol * max(1, |b|), evaluated in double precision.
bool answers_match(const Rational& predicted, const Rational& gold, double rel_tol = 1e-4);

}  // namespace mmtm
