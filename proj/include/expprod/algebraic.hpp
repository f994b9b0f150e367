#pragma once

#include <memory>
#include <string>
#include <vector>

#include "expprod/polynomial.hpp"

namespace expprod {

/// A real algebraic constant: a named root of a univariate rational
/// polynomial, together with its decimal value.
struct AlgebraicConstant {
  std::string name;
  Polynomial defining;  ///< univariate in `name`, irreducible over Q
  double value = 0.0;
};

/// Locates the unique sign change of `defining` inside [lo, hi] by bisection
/// in long double and returns the constant with its decimal value.
AlgebraicConstant make_algebraic_constant(const std::string& name, const Polynomial& defining,
                                          double lo, double hi);

/// Set of constants whose defining relations are used to reduce expressions.
using ConstantSet = std::vector<AlgebraicConstant>;

/// Rewrites `p` so that every constant's exponent is below the degree of its
/// defining polynomial. For irreducible defining polynomials over linearly
/// disjoint extensions this is a canonical form, so a zero result is an exact
/// zero test.
Polynomial reduce_modulo(const Polynomial& p, const ConstantSet& constants);

/// Numeric value of a polynomial in the constants.
double evaluate_constants(const Polynomial& p, const ConstantSet& constants);

/// Element of Q(c1, ..., ck) for algebraic constants c_i, kept in reduced form.
///
/// Values without a constant set behave like plain rational polynomials; the
/// first operand carrying a set propagates it.
class AlgebraicNumber {
 public:
  AlgebraicNumber() = default;
  AlgebraicNumber(const Rational& q) : value_(q) {}  // NOLINT(google-explicit-constructor)
  AlgebraicNumber(Polynomial value, std::shared_ptr<const ConstantSet> constants);

  const Polynomial& polynomial() const { return value_; }
  const std::shared_ptr<const ConstantSet>& constants() const { return constants_; }
  bool is_zero() const { return value_.is_zero(); }
  double to_double() const;

  AlgebraicNumber& operator+=(const AlgebraicNumber& other);
  AlgebraicNumber& operator-=(const AlgebraicNumber& other);
  AlgebraicNumber& operator*=(const AlgebraicNumber& other);

  friend AlgebraicNumber operator+(AlgebraicNumber a, const AlgebraicNumber& b) { return a += b; }
  friend AlgebraicNumber operator-(AlgebraicNumber a, const AlgebraicNumber& b) { return a -= b; }
  friend AlgebraicNumber operator*(AlgebraicNumber a, const AlgebraicNumber& b) { return a *= b; }
  AlgebraicNumber operator-() const { return {-value_, constants_}; }
  friend bool operator==(const AlgebraicNumber& a, const AlgebraicNumber& b) {
    return (a - b).is_zero();
  }

 private:
  void adopt(const AlgebraicNumber& other);

  Polynomial value_;
  std::shared_ptr<const ConstantSet> constants_;
};

std::string to_string(const AlgebraicNumber& a);

}  // namespace expprod
