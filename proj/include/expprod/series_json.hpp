#pragma once

#include <json.hpp>

#include "expprod/lie.hpp"

namespace expprod {

// {"order": k, "generators": ["A","B"], "terms": [{"word": [0,1,1], "coeff": "1/12"}]}
// Rationals are "num/den" strings; polynomial coefficients use the monomial form.

namespace detail {
inline nlohmann::json coeff_json(const Rational& q) { return to_string(q); }
inline nlohmann::json coeff_json(const Polynomial& p) { return coefficient_to_json(p); }
template <class Scalar>
Scalar coeff_from(const nlohmann::json& j);
template <>
inline Rational coeff_from<Rational>(const nlohmann::json& j) {
  return parse_rational(j.get<std::string>());
}
template <>
inline Polynomial coeff_from<Polynomial>(const nlohmann::json& j) {
  return coefficient_from_json(j);
}
}  // namespace detail

template <class Scalar>
nlohmann::json to_json(const NcSeries<Scalar>& s) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [w, c] : s.terms()) terms.push_back({{"word", w}, {"coeff", detail::coeff_json(c)}});
  return {{"order", s.order()}, {"generators", s.alphabet()}, {"terms", terms}};
}

template <class Scalar>
nlohmann::json to_json(const LieCombination<Scalar>& l) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [w, c] : l.terms()) terms.push_back({{"word", w}, {"coeff", detail::coeff_json(c)}});
  return {{"order", l.order()}, {"generators", l.alphabet()}, {"terms", terms}};
}

template <class Scalar>
NcSeries<Scalar> series_from_json(const nlohmann::json& j) {
  NcSeries<Scalar> s(j.at("generators").get<Alphabet>(), j.at("order").get<int>());
  for (const auto& t : j.at("terms")) s.at(t.at("word").get<Word>()) += detail::coeff_from<Scalar>(t.at("coeff"));
  return s;
}

template <class Scalar>
LieCombination<Scalar> lie_from_json(const nlohmann::json& j) {
  LieCombination<Scalar> l(j.at("generators").get<Alphabet>(), j.at("order").get<int>());
  for (const auto& t : j.at("terms")) l.add(t.at("word").get<Word>(), detail::coeff_from<Scalar>(t.at("coeff")));
  return l;
}

}  // namespace expprod
