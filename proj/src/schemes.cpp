#include "expprod/schemes.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace expprod {

namespace {

constexpr double kSumTolerance = 1e-12;

bool coeff_is_zero(const StageCoeff& c) { return c.exact ? c.exact->is_zero() : c.value == 0.0; }

StageCoeff add(const StageCoeff& a, const StageCoeff& b, const ConstantSet& constants) {
  if (a.exact && b.exact) return StageCoeff::algebraic(*a.exact + *b.exact, constants);
  return StageCoeff::numeric(a.value + b.value);
}

StageCoeff multiply(const StageCoeff& a, const StageCoeff& b, const ConstantSet& constants) {
  if (a.exact && b.exact) return StageCoeff::algebraic(*a.exact * *b.exact, constants);
  return StageCoeff::numeric(a.value * b.value);
}

StageCoeff power(const StageCoeff& a, int k, const ConstantSet& constants) {
  StageCoeff out = StageCoeff::rational(Rational(1));
  for (int j = 0; j < k; ++j) out = multiply(out, a, constants);
  return out;
}

bool same_bracket(const Bracket& a, const Bracket& b) {
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return a.leaf == b.leaf;
  return same_bracket(a.children[0], b.children[0]) && same_bracket(a.children[1], b.children[1]);
}

void merge_constants(ConstantSet& into, const ConstantSet& from) {
  for (const auto& c : from) {
    auto it = std::find_if(into.begin(), into.end(), [&](const AlgebraicConstant& k) { return k.name == c.name; });
    if (it == into.end())
      into.push_back(c);
    else if (!(it->defining == c.defining))
      throw std::invalid_argument("conflicting definitions for constant " + c.name);
  }
}

/// Stages of `base` with every coefficient scaled by `factor`.
std::vector<Stage> scaled(const Scheme& base, const StageCoeff& factor, const ConstantSet& constants) {
  std::vector<Stage> out;
  out.reserve(base.stages.size());
  for (const auto& st : base.stages) {
    Stage s = st;
    s.coeff = st.is_commutator() ? multiply(st.coeff, power(factor, st.commutator->x_power, constants), constants)
                                 : multiply(st.coeff, factor, constants);
    out.push_back(std::move(s));
  }
  return out;
}

/// Concatenates scaled copies of `base` and merges adjacent stages.
Scheme compose(const Scheme& base, const std::vector<StageCoeff>& factors, const AlgebraicConstant& constant,
               const std::string& name, int order) {
  if (!base.symmetric) throw std::invalid_argument("composition requires a symmetric base scheme");
  if (base.claimed_order % 2 != 0) throw std::invalid_argument("composition requires an even-order base scheme");
  Scheme out;
  out.name = name;
  out.slots = base.slots;
  out.constants = base.constants;
  merge_constants(out.constants, {constant});
  for (const auto& f : factors) {
    auto part = scaled(base, f, out.constants);
    out.unmerged.insert(out.unmerged.end(), part.begin(), part.end());
  }
  out.stages = merge_adjacent(out.unmerged, out.constants);
  out.claimed_order = order;
  out.symmetric = true;
  validate(out);
  return out;
}

Stage slot_stage(int slot, const Rational& c) { return Stage{slot, std::nullopt, StageCoeff::rational(c)}; }

Scheme simple(const std::string& name, std::vector<std::string> slots, std::vector<Stage> stages, int order,
              bool symmetric) {
  Scheme s;
  s.name = name;
  s.slots = std::move(slots);
  s.stages = std::move(stages);
  s.unmerged = s.stages;
  s.claimed_order = order;
  s.symmetric = symmetric;
  validate(s);
  return s;
}

Polynomial linear(const std::string& var, long a, long b) {
  // a + b * var
  return Polynomial(a) + Polynomial::variable(var) * Rational(b);
}

nlohmann::json bracket_to_json(const Bracket& b, const std::vector<std::string>& slots) {
  if (b.is_leaf()) return slots.at(static_cast<std::size_t>(b.leaf));
  return nlohmann::json::array({bracket_to_json(b.children[0], slots), bracket_to_json(b.children[1], slots)});
}

Bracket bracket_from_json(const nlohmann::json& j, const std::vector<std::string>& slots) {
  if (j.is_string()) {
    auto it = std::find(slots.begin(), slots.end(), j.get<std::string>());
    if (it == slots.end()) throw std::invalid_argument("unknown slot in commutator: " + j.get<std::string>());
    return Bracket::letter(static_cast<int>(it - slots.begin()));
  }
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("commutator must be a label or a pair");
  return Bracket::of(bracket_from_json(j[0], slots), bracket_from_json(j[1], slots));
}

std::string decimal(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

StageCoeff StageCoeff::algebraic(const Polynomial& p, const ConstantSet& constants) {
  Polynomial r = reduce_modulo(p, constants);
  double v = r.is_constant() ? r.constant_term().get_d() : evaluate_constants(r, constants);
  return {std::move(r), v};
}

bool operator==(const StageCoeff& a, const StageCoeff& b) {
  if (a.exact.has_value() != b.exact.has_value()) return false;
  if (a.exact) return *a.exact == *b.exact;
  return a.value == b.value;
}

bool operator==(const Stage& a, const Stage& b) {
  if (a.is_commutator() != b.is_commutator()) return false;
  if (a.is_commutator()) {
    if (a.commutator->x_power != b.commutator->x_power) return false;
    if (!same_bracket(a.commutator->bracket, b.commutator->bracket)) return false;
  } else if (a.slot != b.slot) {
    return false;
  }
  return a.coeff == b.coeff;
}

int Scheme::slot_index(const std::string& label) const {
  auto it = std::find(slots.begin(), slots.end(), label);
  return it == slots.end() ? -1 : static_cast<int>(it - slots.begin());
}

bool is_palindrome(const std::vector<Stage>& stages) {
  const std::size_t n = stages.size();
  for (std::size_t i = 0; i < n / 2; ++i)
    if (!(stages[i] == stages[n - 1 - i])) return false;
  return true;
}

std::vector<Stage> merge_adjacent(const std::vector<Stage>& stages, const ConstantSet& constants) {
  std::vector<Stage> out;
  for (const auto& st : stages) {
    if (coeff_is_zero(st.coeff)) continue;
    if (!st.is_commutator() && !out.empty() && !out.back().is_commutator() && out.back().slot == st.slot) {
      out.back().coeff = add(out.back().coeff, st.coeff, constants);
      if (coeff_is_zero(out.back().coeff)) out.pop_back();
      continue;
    }
    out.push_back(st);
  }
  return out;
}

std::vector<StageCoeff> slot_sums(const Scheme& s) {
  std::vector<StageCoeff> sums(s.slots.size(), StageCoeff::rational(Rational(0)));
  for (const auto& st : s.stages) {
    if (st.is_commutator()) continue;
    auto& acc = sums.at(static_cast<std::size_t>(st.slot));
    acc = add(acc, st.coeff, s.constants);
  }
  return sums;
}

void validate(const Scheme& s) {
  if (s.slots.empty()) throw std::invalid_argument("scheme has no slots");
  for (const auto& st : s.stages) {
    if (st.is_commutator()) {
      const auto& c = *st.commutator;
      if (c.bracket.is_leaf()) throw std::invalid_argument("commutator stage needs bracket depth >= 1");
      if (c.x_power < 2) throw std::invalid_argument("commutator stage needs x_power >= 2");
      if (c.x_power != c.bracket.degree())
        throw std::invalid_argument("commutator x_power must equal the bracket degree");
    } else if (st.slot < 0 || st.slot >= static_cast<int>(s.slots.size())) {
      throw std::invalid_argument("stage slot out of range");
    }
  }
  auto sums = slot_sums(s);
  for (std::size_t k = 0; k < sums.size(); ++k) {
    const auto& c = sums[k];
    bool ok = c.exact ? (*c.exact == Polynomial(1)) : std::abs(c.value - 1.0) <= kSumTolerance;
    if (!ok)
      throw std::invalid_argument(fmt::format("coefficients of slot {} sum to {}, not 1", s.slots[k], c.value));
  }
  if (s.symmetric && !is_palindrome(s.stages)) throw std::invalid_argument("symmetric scheme is not a palindrome");
}

Polynomial triple_defining_polynomial(const std::string& var, int base_order) {
  const int m = base_order + 1;
  return Polynomial::variable(var, m) * Rational(2) + linear(var, 1, -2).pow(m);
}

Polynomial quintuple_defining_polynomial(const std::string& var, int base_order) {
  const int m = base_order + 1;
  return Polynomial::variable(var, m) * Rational(4) + linear(var, 1, -4).pow(m);
}

Scheme trotter() { return simple("trotter", {"A", "B"}, {slot_stage(0, 1), slot_stage(1, 1)}, 1, false); }

Scheme strang() {
  return simple("strang", {"A", "B"},
                {slot_stage(0, make_rational(1, 2)), slot_stage(1, 1), slot_stage(0, make_rational(1, 2))}, 2, true);
}

Scheme triple_jump(const Scheme& base) {
  const int k2 = base.claimed_order;
  const std::string var = k2 == 2 ? "s" : fmt::format("t{}", k2);
  auto constant = make_algebraic_constant(var, triple_defining_polynomial(var, k2), 1.0, 1.5);
  ConstantSet constants = base.constants;
  merge_constants(constants, {constant});
  StageCoeff s = StageCoeff::algebraic(Polynomial::variable(var), constants);
  StageCoeff middle = StageCoeff::algebraic(linear(var, 1, -2), constants);
  return compose(base, {s, middle, s}, constant, fmt::format("triple{}", k2 + 2), k2 + 2);
}

Scheme quintuple(const Scheme& base) {
  const int k2 = base.claimed_order;
  const std::string var = fmt::format("s{}", k2);
  auto constant = make_algebraic_constant(var, quintuple_defining_polynomial(var, k2), 0.3, 0.5);
  ConstantSet constants = base.constants;
  merge_constants(constants, {constant});
  StageCoeff s = StageCoeff::algebraic(Polynomial::variable(var), constants);
  StageCoeff middle = StageCoeff::algebraic(linear(var, 1, -4), constants);
  return compose(base, {s, s, middle, s, s}, constant, fmt::format("quintuple({})", base.name), k2 + 2);
}

Scheme fractal(int order) {
  if (order < 2 || order % 2 != 0) throw std::invalid_argument("fractal order must be even and >= 2");
  Scheme s = strang();
  while (s.claimed_order < order) s = quintuple(s);
  if (order > 2) s.name = fmt::format("s{}", order);
  return s;
}

Scheme ruth() {
  return simple("ruth", {"A", "B"},
                {slot_stage(0, make_rational(7, 24)), slot_stage(1, make_rational(2, 3)),
                 slot_stage(0, make_rational(3, 4)), slot_stage(1, make_rational(-2, 3)),
                 slot_stage(0, make_rational(-1, 24)), slot_stage(1, 1)},
                3, false);
}

Scheme hybrid_second() {
  Stage comm{-1, CommutatorSpec{Bracket::of(Bracket::letter(0), Bracket::letter(1)), 2},
             StageCoeff::rational(make_rational(-1, 2))};
  return simple("hybrid2", {"A", "B"}, {slot_stage(0, 1), slot_stage(1, 1), comm}, 2, false);
}

Scheme hybrid_fourth() {
  const Bracket bab = Bracket::of(Bracket::letter(1), Bracket::of(Bracket::letter(0), Bracket::letter(1)));
  Stage comm{-1, CommutatorSpec{bab, 3}, StageCoeff::rational(make_rational(1, 432))};
  const Rational sixth = make_rational(1, 6);
  const Rational third = make_rational(1, 3);
  // S_a(x) = e^{xA/2} e^{xB} e^{xA/2}, S_b(x) = e^{xB/2} e^{xA} e^{xB/2}, each at x/3
  std::vector<Stage> unmerged = {comm,
                                 slot_stage(0, sixth), slot_stage(1, third), slot_stage(0, sixth),
                                 slot_stage(1, sixth), slot_stage(0, third), slot_stage(1, sixth),
                                 slot_stage(0, sixth), slot_stage(1, third), slot_stage(0, sixth),
                                 comm};
  Scheme s = simple("hybrid4", {"A", "B"}, merge_adjacent(unmerged, {}), 4, true);
  s.unmerged = unmerged;
  return s;
}

Scheme time_ordered_first() {
  return simple("g1", {"A", "B", "T"}, {slot_stage(0, 1), slot_stage(1, 1), slot_stage(2, 1)}, 1, false);
}

Scheme time_ordered_second() {
  const Rational h = make_rational(1, 2);
  return simple("g2", {"A", "B", "T"},
                {slot_stage(2, h), slot_stage(0, h), slot_stage(1, 1), slot_stage(0, h), slot_stage(2, h)}, 2,
                true);
}

Scheme time_ordered_fourth() {
  Scheme s = quintuple(time_ordered_second());
  s.name = "g4";
  return s;
}

bool has_negative_coefficient(const Scheme& s) {
  return std::any_of(s.stages.begin(), s.stages.end(),
                     [](const Stage& st) { return !st.is_commutator() && st.coeff.value < 0.0; });
}

std::vector<TimedStage> evaluation_times(const Scheme& s, double t, double dt) {
  const int tslot = s.slot_index("T");
  if (tslot < 0) throw std::invalid_argument("evaluation_times: scheme has no T slot");
  std::vector<TimedStage> out;
  StageCoeff tau = StageCoeff::rational(Rational(0));
  for (auto it = s.stages.rbegin(); it != s.stages.rend(); ++it) {
    if (!it->is_commutator() && it->slot == tslot) {
      tau = add(tau, it->coeff, s.constants);
      continue;
    }
    out.push_back(TimedStage{it->slot, it->coeff, tau, t + tau.value * dt});
  }
  return out;
}

Scheme strip_slot(const Scheme& s, const std::string& label) {
  const int idx = s.slot_index(label);
  if (idx < 0) throw std::invalid_argument("strip_slot: unknown slot " + label);
  Scheme out = s;
  out.slots.erase(out.slots.begin() + idx);
  out.stages.clear();
  for (const auto& st : s.stages) {
    if (!st.is_commutator() && st.slot == idx) continue;
    Stage c = st;
    if (!c.is_commutator() && c.slot > idx) --c.slot;
    out.stages.push_back(c);
  }
  out.unmerged = out.stages;
  out.name = s.name + "-" + label;
  return out;
}

std::vector<Scheme> scheme_catalog() {
  return {trotter(),       strang(),
          triple_jump(strang()), fractal(4), fractal(6), fractal(8),
          ruth(),          hybrid_second(), hybrid_fourth(),
          time_ordered_first(), time_ordered_second(), time_ordered_fourth()};
}

Scheme find_scheme(const std::string& name) {
  if (name == "quintuple") return fractal(4);
  for (auto& s : scheme_catalog())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown scheme: " + name);
}

nlohmann::json to_json(const Scheme& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["slots"] = s.slots;
  j["order"] = s.claimed_order;
  j["symmetric"] = s.symmetric;
  nlohmann::json consts = nlohmann::json::array();
  for (const auto& c : s.constants)
    consts.push_back({{"name", c.name}, {"defining", to_json(c.defining)}, {"value", decimal(c.value)}});
  j["constants"] = consts;
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : s.stages) {
    nlohmann::json e;
    if (st.is_commutator()) {
      e["commutator"] = bracket_to_json(st.commutator->bracket, s.slots);
      e["x_power"] = st.commutator->x_power;
    } else {
      e["slot"] = st.slot;
    }
    if (st.coeff.is_rational()) {
      e["coeff"] = to_string(st.coeff.exact->constant_term());
    } else {
      e["coeff"] = decimal(st.coeff.value);
      e["exact"] = st.coeff.exact ? to_json(*st.coeff.exact) : nlohmann::json(nullptr);
    }
    stages.push_back(std::move(e));
  }
  j["stages"] = stages;
  return j;
}

Scheme scheme_from_json(const nlohmann::json& j) {
  Scheme s;
  s.name = j.value("name", std::string("custom"));
  s.slots = j.at("slots").get<std::vector<std::string>>();
  s.claimed_order = j.at("order").get<int>();
  s.symmetric = j.value("symmetric", false);
  if (j.contains("constants"))
    for (const auto& c : j.at("constants")) {
      AlgebraicConstant k{c.at("name").get<std::string>(), polynomial_from_json(c.at("defining")), 0.0};
      k.value = std::stod(c.at("value").get<std::string>());
      s.constants.push_back(std::move(k));
    }
  for (const auto& e : j.at("stages")) {
    Stage st;
    if (e.contains("commutator")) {
      st.commutator = CommutatorSpec{bracket_from_json(e.at("commutator"), s.slots), e.at("x_power").get<int>()};
    } else {
      st.slot = e.at("slot").get<int>();
    }
    const auto& c = e.at("coeff");
    if (e.contains("exact")) {
      const auto& x = e.at("exact");
      double v = c.is_string() ? std::stod(c.get<std::string>()) : c.get<double>();
      st.coeff = x.is_null() ? StageCoeff::numeric(v) : StageCoeff{reduce_modulo(polynomial_from_json(x), s.constants), v};
    } else if (c.is_string()) {
      const auto text = c.get<std::string>();
      if (text.find_first_of(".eE") != std::string::npos)
        st.coeff = StageCoeff::numeric(std::stod(text));
      else
        st.coeff = StageCoeff::rational(parse_rational(text));
    } else {
      st.coeff = StageCoeff::numeric(c.get<double>());
    }
    s.stages.push_back(std::move(st));
  }
  s.unmerged = s.stages;
  validate(s);
  return s;
}

bool all_exact(const Scheme& s) {
  return std::all_of(s.stages.begin(), s.stages.end(), [](const Stage& st) { return st.coeff.exact.has_value(); });
}

std::vector<SeriesStage<AlgebraicNumber>> exact_series_stages(const Scheme& s, int order) {
  auto constants = s.constant_set();
  std::vector<SeriesStage<AlgebraicNumber>> out;
  out.reserve(s.stages.size());
  for (const auto& st : s.stages) {
    if (!st.coeff.exact) throw std::invalid_argument("exact_series_stages: stage has no exact coefficient");
    AlgebraicNumber c(*st.coeff.exact, constants);
    if (st.is_commutator())
      out.push_back({bracket_series<AlgebraicNumber>(st.commutator->bracket, s.slots, order), c});
    else
      out.push_back({NcSeries<AlgebraicNumber>::generator(s.slots, order, st.slot), c});
  }
  return out;
}

std::vector<SeriesStage<double>> numeric_series_stages(const Scheme& s, int order) {
  std::vector<SeriesStage<double>> out;
  out.reserve(s.stages.size());
  for (const auto& st : s.stages) {
    if (st.is_commutator())
      out.push_back({bracket_series<double>(st.commutator->bracket, s.slots, order), st.coeff.value});
    else
      out.push_back({NcSeries<double>::generator(s.slots, order, st.slot), st.coeff.value});
  }
  return out;
}

}  // namespace expprod
