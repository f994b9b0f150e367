#include "expprod/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace expprod {

namespace {

Monomial multiply_monomials(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.reserve(a.size() + b.size());
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      out.push_back(*ia++);
    } else if (ia == a.end() || ib->first < ia->first) {
      out.push_back(*ib++);
    } else {
      out.emplace_back(ia->first, ia->second + ib->second);
      ++ia;
      ++ib;
    }
  }
  return out;
}

}  // namespace

Polynomial::Polynomial(const Rational& constant) {
  if (constant != 0) terms_.emplace(Monomial{}, constant);
}

Polynomial Polynomial::variable(const std::string& name, int power) {
  if (name.empty()) throw std::invalid_argument("empty variable name");
  Polynomial p;
  if (power == 0)
    p.terms_.emplace(Monomial{}, Rational(1));
  else
    p.terms_.emplace(Monomial{{name, power}}, Rational(1));
  return p;
}

bool Polynomial::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
}

Rational Polynomial::constant_term() const {
  auto it = terms_.find(Monomial{});
  return it == terms_.end() ? Rational(0) : it->second;
}

std::set<std::string> Polynomial::variables() const {
  std::set<std::string> vars;
  for (const auto& [m, c] : terms_)
    for (const auto& [v, e] : m) vars.insert(v);
  return vars;
}

int Polynomial::degree_in(const std::string& var) const {
  int deg = 0;
  for (const auto& [m, c] : terms_)
    for (const auto& [v, e] : m)
      if (v == var) deg = std::max(deg, e);
  return deg;
}

int Polynomial::total_degree() const {
  int deg = 0;
  for (const auto& [m, c] : terms_) {
    int d = 0;
    for (const auto& [v, e] : m) d += e;
    deg = std::max(deg, d);
  }
  return deg;
}

void Polynomial::add_term(const Monomial& m, const Rational& c) {
  if (c == 0) return;
  auto [it, inserted] = terms_.emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, Rational(-c));
  return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& other) {
  *this = *this * other;
  return *this;
}

Polynomial& Polynomial::operator*=(const Rational& factor) {
  if (factor == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, c] : terms_) c *= factor;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial out;
  if (a.is_zero() || b.is_zero()) return out;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) out.add_term(multiply_monomials(ma, mb), Rational(ca * cb));
  return out;
}

Polynomial Polynomial::operator-() const {
  Polynomial out = *this;
  for (auto& [m, c] : out.terms_) c = -c;
  return out;
}

Polynomial Polynomial::pow(int exponent) const {
  if (exponent < 0) throw std::invalid_argument("negative polynomial power");
  Polynomial result(Rational(1));
  Polynomial base = *this;
  while (exponent > 0) {
    if (exponent & 1) result = result * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result;
}

Polynomial Polynomial::derivative(const std::string& var) const {
  Polynomial out;
  for (const auto& [m, c] : terms_) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (m[k].first != var) continue;
      Monomial dm = m;
      int e = dm[k].second;
      if (e == 1)
        dm.erase(dm.begin() + static_cast<long>(k));
      else
        dm[k].second = e - 1;
      out.add_term(dm, Rational(c * e));
    }
  }
  return out;
}

Polynomial Polynomial::substitute(const std::string& var, const Polynomial& value) const {
  Polynomial out;
  std::map<int, Polynomial> powers;
  for (const auto& [m, c] : terms_) {
    Monomial rest;
    int e = 0;
    for (const auto& ve : m) {
      if (ve.first == var)
        e = ve.second;
      else
        rest.push_back(ve);
    }
    Polynomial term;
    term.add_term(rest, c);
    if (e > 0) {
      auto it = powers.find(e);
      if (it == powers.end()) it = powers.emplace(e, value.pow(e)).first;
      term = term * it->second;
    }
    out += term;
  }
  return out;
}

double Polynomial::evaluate(const std::map<std::string, double>& values) const {
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c.get_d();
    for (const auto& [v, e] : m) {
      auto it = values.find(v);
      if (it == values.end()) throw std::invalid_argument("unbound variable: " + v);
      t *= std::pow(it->second, e);
    }
    sum += t;
  }
  return sum;
}

Rational Polynomial::evaluate_exact(const std::map<std::string, Rational>& values) const {
  Rational sum = 0;
  for (const auto& [m, c] : terms_) {
    Rational t = c;
    for (const auto& [v, e] : m) {
      auto it = values.find(v);
      if (it == values.end()) throw std::invalid_argument("unbound variable: " + v);
      for (int k = 0; k < e; ++k) t *= it->second;
    }
    sum += t;
  }
  return sum;
}

std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    Rational mag = abs(c);
    if (first) {
      if (c < 0) out += "-";
    } else {
      out += c < 0 ? " - " : " + ";
    }
    first = false;
    bool unit = mag == 1 && !m.empty();
    if (!unit) out += to_string(mag);
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (!unit || k > 0) out += "*";
      out += m[k].first;
      if (m[k].second != 1) out += "^" + std::to_string(m[k].second);
    }
  }
  return out;
}

nlohmann::json to_json(const Polynomial& p) {
  nlohmann::json monomials = nlohmann::json::array();
  for (const auto& [m, c] : p.terms()) {
    nlohmann::json powers = nlohmann::json::object();
    for (const auto& [v, e] : m) powers[v] = e;
    monomials.push_back({{"powers", powers}, {"coeff", to_string(c)}});
  }
  return {{"monomials", monomials}};
}

Polynomial polynomial_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("monomials") || !j.at("monomials").is_array())
    throw std::invalid_argument("polynomial JSON needs a \"monomials\" array");
  Polynomial p;
  for (const auto& mono : j.at("monomials")) {
    Monomial m;
    for (const auto& [v, e] : mono.at("powers").items()) {
      int power = e.get<int>();
      if (power < 0) throw std::invalid_argument("negative power in polynomial JSON");
      if (power > 0) m.emplace_back(v, power);
    }
    std::sort(m.begin(), m.end());
    p.add_term(m, parse_rational(mono.at("coeff").get<std::string>()));
  }
  return p;
}

nlohmann::json coefficient_to_json(const Polynomial& p) {
  if (p.is_constant()) return to_string(p.constant_term());
  return to_json(p);
}

Polynomial coefficient_from_json(const nlohmann::json& j) {
  if (j.is_string()) return Polynomial(parse_rational(j.get<std::string>()));
  return polynomial_from_json(j);
}

}  // namespace expprod
