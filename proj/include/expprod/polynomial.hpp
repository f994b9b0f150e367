#pragma once

#include <json.hpp>

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "expprod/rational.hpp"

namespace expprod {

/// Sorted (variable, exponent) pairs, exponents strictly positive.
using Monomial = std::vector<std::pair<std::string, int>>;

/// Multivariate polynomial over the rationals in named variables.
///
/// Zero coefficients are never stored, so `terms().empty()` is the zero
/// polynomial and term-by-term comparison is exact equality.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(const Rational& constant);  // NOLINT(google-explicit-constructor)
  Polynomial(long constant) : Polynomial(Rational(constant)) {}  // NOLINT

  static Polynomial variable(const std::string& name, int power = 1);

  const std::map<Monomial, Rational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  /// Constant term (zero when absent).
  Rational constant_term() const;

  std::set<std::string> variables() const;
  int degree_in(const std::string& var) const;
  int total_degree() const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(const Polynomial& other);
  Polynomial& operator*=(const Rational& factor);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(Polynomial a, const Rational& b) { return a *= b; }
  friend Polynomial operator*(const Rational& b, Polynomial a) { return a *= b; }
  Polynomial operator-() const;
  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.terms_ == b.terms_; }

  Polynomial pow(int exponent) const;
  Polynomial derivative(const std::string& var) const;
  Polynomial substitute(const std::string& var, const Polynomial& value) const;

  double evaluate(const std::map<std::string, double>& values) const;
  Rational evaluate_exact(const std::map<std::string, Rational>& values) const;

  void add_term(const Monomial& m, const Rational& c);

 private:
  std::map<Monomial, Rational> terms_;
};

std::string to_string(const Polynomial& p);

/// {"monomials": [{"powers": {"p1": 1}, "coeff": "-2/3"}]}
nlohmann::json to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j);

/// Serializes a plain rational as "num/den" and anything else in monomial form.
nlohmann::json coefficient_to_json(const Polynomial& p);
Polynomial coefficient_from_json(const nlohmann::json& j);

}  // namespace expprod
