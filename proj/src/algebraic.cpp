#include "expprod/algebraic.hpp"

#include <cmath>
#include <stdexcept>

namespace expprod {

namespace {

long double eval_long(const Polynomial& p, const std::string& var, long double x) {
  long double sum = 0.0L;
  for (const auto& [m, c] : p.terms()) {
    long double t = c.get_d();
    for (const auto& [v, e] : m) {
      if (v != var) throw std::invalid_argument("defining polynomial is not univariate in " + var);
      t *= std::pow(x, static_cast<long double>(e));
    }
    sum += t;
  }
  return sum;
}

}  // namespace

AlgebraicConstant make_algebraic_constant(const std::string& name, const Polynomial& defining,
                                          double lo, double hi) {
  long double a = lo;
  long double b = hi;
  long double fa = eval_long(defining, name, a);
  long double fb = eval_long(defining, name, b);
  if (fa == 0.0L) return {name, defining, static_cast<double>(a)};
  if (fb == 0.0L) return {name, defining, static_cast<double>(b)};
  if ((fa < 0) == (fb < 0))
    throw std::invalid_argument("no sign change of defining polynomial for " + name);
  for (int iter = 0; iter < 200 && b - a > 0; ++iter) {
    long double mid = 0.5L * (a + b);
    if (mid == a || mid == b) break;
    long double fm = eval_long(defining, name, mid);
    if (fm == 0.0L) {
      a = b = mid;
      break;
    }
    if ((fm < 0) == (fa < 0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return {name, defining, static_cast<double>(0.5L * (a + b))};
}

Polynomial reduce_modulo(const Polynomial& p, const ConstantSet& constants) {
  Polynomial current = p;
  for (const auto& k : constants) {
    int degree = k.defining.degree_in(k.name);
    if (degree <= 0) continue;
    Rational lead = 0;
    Polynomial tail;
    for (const auto& [m, c] : k.defining.terms()) {
      int e = m.empty() ? 0 : m.front().second;
      if (e == degree)
        lead = c;
      else
        tail.add_term(m, c);
    }
    // name^degree == replacement
    Polynomial replacement = tail * Rational(-1 / lead);
    bool changed = true;
    while (changed) {
      changed = false;
      Polynomial next;
      for (const auto& [m, c] : current.terms()) {
        int e = 0;
        Monomial rest;
        for (const auto& ve : m) {
          if (ve.first == k.name)
            e = ve.second;
          else
            rest.push_back(ve);
        }
        if (e < degree) {
          next.add_term(m, c);
          continue;
        }
        changed = true;
        Polynomial term;
        term.add_term(rest, c);
        term *= Polynomial::variable(k.name, e - degree);
        term *= replacement;
        next += term;
      }
      current = std::move(next);
    }
  }
  return current;
}

double evaluate_constants(const Polynomial& p, const ConstantSet& constants) {
  std::map<std::string, double> values;
  for (const auto& k : constants) values[k.name] = k.value;
  return p.evaluate(values);
}

AlgebraicNumber::AlgebraicNumber(Polynomial value, std::shared_ptr<const ConstantSet> constants)
    : value_(std::move(value)), constants_(std::move(constants)) {
  if (constants_) value_ = reduce_modulo(value_, *constants_);
}

double AlgebraicNumber::to_double() const {
  if (value_.is_constant()) return value_.constant_term().get_d();
  if (!constants_) throw std::logic_error("algebraic number without constants: " + to_string(value_));
  return evaluate_constants(value_, *constants_);
}

void AlgebraicNumber::adopt(const AlgebraicNumber& other) {
  if (!constants_ && other.constants_) constants_ = other.constants_;
}

AlgebraicNumber& AlgebraicNumber::operator+=(const AlgebraicNumber& other) {
  adopt(other);
  value_ += other.value_;
  return *this;
}

AlgebraicNumber& AlgebraicNumber::operator-=(const AlgebraicNumber& other) {
  adopt(other);
  value_ -= other.value_;
  return *this;
}

AlgebraicNumber& AlgebraicNumber::operator*=(const AlgebraicNumber& other) {
  adopt(other);
  if (value_.is_constant() || other.value_.is_constant()) {
    value_ *= other.value_;
    return *this;
  }
  value_ *= other.value_;
  if (constants_) value_ = reduce_modulo(value_, *constants_);
  return *this;
}

std::string to_string(const AlgebraicNumber& a) { return to_string(a.polynomial()); }

}  // namespace expprod
