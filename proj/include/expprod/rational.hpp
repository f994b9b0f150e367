#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

namespace expprod {

/// Exact rational number (GMP backed, always canonical).
using Rational = mpq_class;

/// Parses "7/24", "-3", "0.25" or "1.5e-3" into an exact rational.
/// Throws std::invalid_argument on malformed text or a zero denominator.
Rational parse_rational(std::string_view text);

/// Canonical "num/den" text, or just "num" when the denominator is one.
std::string to_string(const Rational& q);

inline Rational make_rational(long num, long den = 1) {
  Rational q(num, den);
  q.canonicalize();
  return q;
}

/// Best rational approximation with denominator at most `max_den`
/// (continued-fraction convergents).
Rational rationalize(double value, long max_den);

}  // namespace expprod
