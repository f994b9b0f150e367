#include <gtest/gtest.h>

#include <cmath>

#include "expprod/lie.hpp"
#include "expprod/schemes.hpp"
#include "oracles.hpp"

using namespace expprod;

namespace {

Rational q(long n, long d = 1) { return make_rational(n, d); }

NcSeries<AlgebraicNumber> exact_log(const Scheme& s, int order) {
  return product_log(exact_series_stages(s, order));
}

Scheme with_stages(const Scheme& s, std::vector<Stage> stages) {
  Scheme out = s;
  out.stages = std::move(stages);
  return out;
}

std::vector<double> slot_values(const Scheme& s, const std::string& label) {
  const int slot = s.slot_index(label);
  std::vector<double> v;
  for (const auto& st : s.stages)
    if (!st.is_commutator() && st.slot == slot) v.push_back(st.coeff.value);
  return v;
}

void expect_rational(const StageCoeff& c, const Rational& expected) {
  ASSERT_TRUE(c.is_rational());
  EXPECT_EQ(c.exact->constant_term(), expected);
}

}  // namespace

TEST(Trotter, SumsAreOne) {
  const auto sums = slot_sums(trotter());
  ASSERT_EQ(sums.size(), 2u);
  expect_rational(sums[0], 1);
  expect_rational(sums[1], 1);
  EXPECT_EQ(trotter().claimed_order, 1);
  EXPECT_FALSE(has_negative_coefficient(trotter()));
}

TEST(Strang, StagesAndSymmetry) {
  const Scheme s = strang();
  ASSERT_EQ(s.stages.size(), 3u);
  EXPECT_EQ(s.slots[static_cast<std::size_t>(s.stages[0].slot)], "A");
  expect_rational(s.stages[0].coeff, q(1, 2));
  EXPECT_EQ(s.slots[static_cast<std::size_t>(s.stages[1].slot)], "B");
  expect_rational(s.stages[1].coeff, 1);
  expect_rational(s.stages[2].coeff, q(1, 2));
  EXPECT_TRUE(s.symmetric);
  EXPECT_TRUE(is_palindrome(s.stages));
  EXPECT_EQ(s.claimed_order, 2);
}

TEST(TripleJump, RootAndMergedCoefficients) {
  const Scheme t = triple_jump(strang());
  const double s = 1.351207191959657;
  EXPECT_NEAR(static_cast<double>(oracle::triple_root(1)), s, 1e-15);
  const auto a = slot_values(t, "A");
  const auto b = slot_values(t, "B");
  ASSERT_EQ(a.size(), 4u);
  ASSERT_EQ(b.size(), 3u);
  const std::vector<double> ea{s / 2, (1 - s) / 2, (1 - s) / 2, s / 2};
  const std::vector<double> eb{s, 1 - 2 * s, s};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(a[k], ea[k], 1e-14);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(b[k], eb[k], 1e-14);
  EXPECT_NEAR(b[1], -1.702414383919315, 1e-14);
  EXPECT_EQ(t.claimed_order, 4);
  EXPECT_TRUE(has_negative_coefficient(t));
}

TEST(TripleJump, RejectsAsymmetricBase) {
  EXPECT_THROW(triple_jump(trotter()), std::invalid_argument);
  EXPECT_THROW(triple_jump(ruth()), std::invalid_argument);
}

TEST(Quintuple, MergedCoefficients) {
  const Scheme f = quintuple(strang());
  const double s2 = 0.414490771794375;
  EXPECT_NEAR(static_cast<double>(oracle::quintuple_root(1)), s2, 1e-15);
  const auto a = slot_values(f, "A");
  const auto b = slot_values(f, "B");
  const std::vector<double> ea{s2 / 2, s2, (1 - 3 * s2) / 2, (1 - 3 * s2) / 2, s2, s2 / 2};
  const std::vector<double> eb{s2, s2, 1 - 4 * s2, s2, s2};
  ASSERT_EQ(a.size(), ea.size());
  ASSERT_EQ(b.size(), eb.size());
  for (std::size_t k = 0; k < ea.size(); ++k) EXPECT_NEAR(a[k], ea[k], 1e-14);
  for (std::size_t k = 0; k < eb.size(); ++k) EXPECT_NEAR(b[k], eb[k], 1e-14);
  EXPECT_NEAR(b[2], -0.657963087177500, 1e-14);
  EXPECT_LT(a[2], 0.0);
  EXPECT_TRUE(has_negative_coefficient(f));
  EXPECT_THROW(quintuple(trotter()), std::invalid_argument);
}

TEST(Quintuple, HigherConstants) {
  const Scheme s6 = fractal(6);
  const Scheme s8 = fractal(8);
  ASSERT_EQ(s6.constants.size(), 2u);
  ASSERT_EQ(s8.constants.size(), 3u);
  EXPECT_NEAR(s6.constants[1].value, 0.373065827733272, 1e-15);
  EXPECT_NEAR(s8.constants[2].value, 0.359584649349992, 1e-15);
  EXPECT_NEAR(s6.constants[1].value, static_cast<double>(oracle::quintuple_root(2)), 1e-15);
  EXPECT_NEAR(s8.constants[2].value, static_cast<double>(oracle::quintuple_root(3)), 1e-15);
  EXPECT_EQ(s6.claimed_order, 6);
  EXPECT_EQ(s8.claimed_order, 8);
}

TEST(Quintuple, DefiningPolynomialsVanishAtRoots) {
  for (int k = 1; k <= 3; ++k) {
    const double st = static_cast<double>(oracle::triple_root(k));
    const double sq = static_cast<double>(oracle::quintuple_root(k));
    EXPECT_NEAR(triple_defining_polynomial("s", 2 * k).evaluate({{"s", st}}), 0.0, 1e-12);
    EXPECT_NEAR(quintuple_defining_polynomial("s", 2 * k).evaluate({{"s", sq}}), 0.0, 1e-12);
  }
}

TEST(Ruth, CoefficientsAndQuadraticCondition) {
  const Scheme r = ruth();
  const std::vector<Rational> p{q(7, 24), q(2, 3), q(3, 4), q(-2, 3), q(-1, 24), q(1)};
  ASSERT_EQ(r.stages.size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) {
    expect_rational(r.stages[k].coeff, p[k]);
    EXPECT_EQ(r.slots[static_cast<std::size_t>(r.stages[k].slot)], k % 2 ? "B" : "A");
  }
  expect_rational(slot_sums(r)[0], 1);
  expect_rational(slot_sums(r)[1], 1);
  // q = p2 p3 + p2 p5 + p4 p5
  EXPECT_EQ(p[1] * p[2] + p[1] * p[4] + p[3] * p[4], q(1, 2));
  EXPECT_FALSE(r.symmetric);
  EXPECT_EQ(r.claimed_order, 3);
}

TEST(Hybrid, SecondOrderCommutatorStage) {
  const Scheme h = hybrid_second();
  ASSERT_EQ(h.stages.size(), 3u);
  const Stage& c = h.stages[2];
  ASSERT_TRUE(c.is_commutator());
  EXPECT_EQ(c.commutator->x_power, 2);
  EXPECT_EQ(bracket_string(c.commutator->bracket, h.slots), "[A,B]");
  expect_rational(c.coeff, q(-1, 2));
  EXPECT_FALSE(has_negative_coefficient(h));
}

TEST(Hybrid, FourthOrderEndsAndInnerProduct) {
  const Scheme h = hybrid_fourth();
  ASSERT_GE(h.stages.size(), 3u);
  for (const Stage* end : {&h.stages.front(), &h.stages.back()}) {
    ASSERT_TRUE(end->is_commutator());
    EXPECT_EQ(end->commutator->x_power, 3);
    EXPECT_EQ(bracket_string(end->commutator->bracket, h.slots), "[B,[A,B]]");
    expect_rational(end->coeff, q(1, 432));
  }
  EXPECT_TRUE(h.symmetric);
  EXPECT_EQ(h.claimed_order, 4);

  // S_a(x/3) S_b(x/3) S_a(x/3) with S_a(y) = e^{yA/2} e^{yB} e^{yA/2}, S_b(y) = e^{yB/2} e^{yA} e^{yB/2}
  std::vector<std::pair<char, oracle::Q>> inner;
  for (const char* part : {"a", "b", "a"}) {
    const char outer = part[0] == 'a' ? 'A' : 'B';
    const char mid = part[0] == 'a' ? 'B' : 'A';
    inner.emplace_back(outer, oracle::Q(1, 6));
    inner.emplace_back(mid, oracle::Q(1, 3));
    inner.emplace_back(outer, oracle::Q(1, 6));
  }
  const int order = 6;
  const auto expected = oracle::product_log(inner, order);
  std::vector<std::pair<int, Rational>> flattened;
  for (std::size_t k = 1; k + 1 < h.stages.size(); ++k) {
    ASSERT_FALSE(h.stages[k].is_commutator());
    flattened.emplace_back(h.stages[k].slot, h.stages[k].coeff.exact->constant_term());
  }
  const auto phi = product_log(Alphabet{"A", "B"}, flattened, order);
  for (const auto& [w, c] : phi.terms()) {
    std::string key;
    for (int l : w) key += l == 0 ? 'A' : 'B';
    EXPECT_EQ(c, expected.at(key)) << key;
  }
  EXPECT_EQ(phi.terms().size(), expected.terms.size());
}

TEST(NegativeCoefficients, Detection) {
  EXPECT_FALSE(has_negative_coefficient(trotter()));
  EXPECT_FALSE(has_negative_coefficient(strang()));
  EXPECT_TRUE(has_negative_coefficient(ruth()));
  EXPECT_TRUE(has_negative_coefficient(quintuple(strang())));
  EXPECT_TRUE(has_negative_coefficient(triple_jump(strang())));
  EXPECT_FALSE(has_negative_coefficient(hybrid_fourth()));
}

TEST(Catalog, InvariantsHoldForEveryScheme) {
  for (const Scheme& s : scheme_catalog()) {
    SCOPED_TRACE(s.name);
    EXPECT_NO_THROW(validate(s));
    for (const auto& sum : slot_sums(s)) {
      ASSERT_TRUE(sum.exact.has_value());
      EXPECT_EQ(reduce_modulo(*sum.exact - Polynomial(Rational(1)), s.constants), Polynomial());
    }
    if (s.symmetric) EXPECT_TRUE(is_palindrome(s.stages));
  }
}

TEST(Catalog, JsonRoundTripIsExact) {
  for (const Scheme& s : scheme_catalog()) {
    SCOPED_TRACE(s.name);
    const Scheme back = scheme_from_json(to_json(s));
    EXPECT_EQ(back.slots, s.slots);
    EXPECT_EQ(back.claimed_order, s.claimed_order);
    EXPECT_EQ(back.symmetric, s.symmetric);
    ASSERT_EQ(back.stages.size(), s.stages.size());
    for (std::size_t k = 0; k < s.stages.size(); ++k) EXPECT_TRUE(back.stages[k] == s.stages[k]) << k;
    EXPECT_EQ(to_json(back), to_json(s));
  }
}

TEST(Catalog, FindByName) {
  EXPECT_EQ(find_scheme("ruth").stages.size(), 6u);
  EXPECT_THROW(find_scheme("no-such-scheme"), std::invalid_argument);
}

TEST(Flatten, MergedEqualsNestedComposition) {
  for (const std::string name : {"strang", "triple4", "s4", "s6", "ruth", "hybrid2", "hybrid4"}) {
    SCOPED_TRACE(name);
    const Scheme s = find_scheme(name);
    ASSERT_FALSE(s.unmerged.empty());
    const int order = name == "s6" ? 5 : 6;
    EXPECT_EQ(exact_log(s, order), exact_log(with_stages(s, s.unmerged), order));
  }
}

TEST(Flatten, SymmetricSchemesHaveNoEvenDegrees) {
  for (const std::string name : {"strang", "triple4", "s4", "hybrid4"}) {
    SCOPED_TRACE(name);
    const auto phi = exact_log(find_scheme(name), 8);
    for (int d = 2; d <= 8; d += 2) EXPECT_TRUE(phi.homogeneous(d).is_zero()) << "degree " << d;
  }
}

TEST(Flatten, MergeDropsNothingForStrang) {
  const Scheme s = strang();
  EXPECT_EQ(merge_adjacent(s.stages, s.constants).size(), 3u);
  std::vector<Stage> doubled = s.stages;
  doubled.insert(doubled.end(), s.stages.begin(), s.stages.end());
  const auto merged = merge_adjacent(doubled, s.constants);
  ASSERT_EQ(merged.size(), 5u);
  expect_rational(merged[2].coeff, 1);
}

TEST(EvaluationTimes, FirstOrder) {
  const auto times = evaluation_times(time_ordered_first(), 2.0, 0.1);
  ASSERT_EQ(times.size(), 2u);
  for (const auto& ts : times) EXPECT_NEAR(ts.time, 2.1, 1e-15);
}

TEST(EvaluationTimes, SecondOrderMidpoint) {
  const auto times = evaluation_times(time_ordered_second(), 1.0, 0.5);
  ASSERT_EQ(times.size(), 3u);
  for (const auto& ts : times) EXPECT_NEAR(ts.time, 1.25, 1e-15);
}

TEST(EvaluationTimes, FourthOrderTriples) {
  const double s2 = static_cast<double>(oracle::quintuple_root(1));
  const auto times = evaluation_times(time_ordered_fourth(), 0.0, 1.0);
  ASSERT_EQ(times.size(), 15u);
  const std::vector<double> expected{s2 / 2, 3 * s2 / 2, 0.5, (2 - 3 * s2) / 2, (2 - s2) / 2};
  for (std::size_t k = 0; k < 15; ++k) EXPECT_NEAR(times[k].time, expected[k / 3], 1e-14) << k;
}

TEST(EvaluationTimes, RequiresShiftSlot) {
  EXPECT_THROW(evaluation_times(strang(), 0.0, 1.0), std::invalid_argument);
}
