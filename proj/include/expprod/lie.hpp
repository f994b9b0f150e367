#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "expprod/nc_series.hpp"

namespace expprod {

/// Thrown when a series has a component outside the free Lie algebra.
class NotLieElement : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Integer word expansion of the standard bracketing of a Lyndon word.
/// The smallest word in the expansion is `w` itself, with coefficient one.
std::map<Word, long long> lyndon_expansion(const Word& w);

/// Bracket tree over generator ids: a leaf, or [left, right].
struct Bracket {
  int leaf = -1;
  std::vector<Bracket> children;  ///< empty for a leaf, else exactly two

  static Bracket letter(int id) { return Bracket{id, {}}; }
  static Bracket of(Bracket left, Bracket right) {
    Bracket b;
    b.children = {std::move(left), std::move(right)};
    return b;
  }
  bool is_leaf() const { return children.empty(); }
  int degree() const { return is_leaf() ? 1 : children[0].degree() + children[1].degree(); }
};

std::map<Word, long long> bracket_expansion(const Bracket& b);
std::string bracket_string(const Bracket& b, const Alphabet& alphabet);

/// Element of the free Lie algebra in the Lyndon basis.
template <class Scalar>
class LieCombination {
 public:
  using Traits = ScalarTraits<Scalar>;

  LieCombination(Alphabet alphabet, int order) : alphabet_(std::move(alphabet)), order_(order) {}

  const Alphabet& alphabet() const { return alphabet_; }
  int order() const { return order_; }
  const std::map<Word, Scalar>& terms() const { return terms_; }

  /// Coefficient of the Lyndon basis element `w` (zero when absent).
  Scalar coefficient(const Word& w) const {
    auto it = terms_.find(w);
    return it == terms_.end() ? Scalar{} : it->second;
  }

  void add(const Word& w, const Scalar& c) {
    if (!is_lyndon(w)) throw std::invalid_argument("LieCombination key must be a Lyndon word");
    if (static_cast<int>(w.size()) > order_) return;
    Scalar& slot = terms_[w];
    slot += c;
    if (Traits::is_zero(slot)) terms_.erase(w);
  }

  /// Terms of one degree, ordered lexicographically.
  std::vector<std::pair<Word, Scalar>> degree_terms(int degree) const {
    std::vector<std::pair<Word, Scalar>> out;
    for (const auto& [w, c] : terms_)
      if (static_cast<int>(w.size()) == degree) out.emplace_back(w, c);
    return out;
  }

  int min_degree() const {
    int d = order_ + 1;
    for (const auto& [w, c] : terms_) d = std::min(d, static_cast<int>(w.size()));
    return d;
  }

  NcSeries<Scalar> expand() const {
    NcSeries<Scalar> out(alphabet_, order_);
    for (const auto& [w, c] : terms_)
      for (const auto& [u, n] : lyndon_expansion(w)) out.at(u) += c * Traits::from_rational(Rational(static_cast<long>(n)));
    return out;
  }

  friend bool operator==(const LieCombination& a, const LieCombination& b) {
    return a.alphabet_ == b.alphabet_ && a.terms_ == b.terms_;
  }

 private:
  Alphabet alphabet_;
  int order_;
  std::map<Word, Scalar> terms_;
};

namespace detail {
template <class Scalar>
bool negligible(const Scalar& c, double tol) {
  if constexpr (std::is_same_v<Scalar, double>)
    return std::abs(c) <= tol;
  else
    return ScalarTraits<Scalar>::is_zero(c);
}
}  // namespace detail

/// Rewrites a series with zero constant term in the Lyndon basis by
/// triangular elimination: the smallest remaining word must be Lyndon, and
/// its bracket expansion is subtracted. For `double` coefficients, entries
/// with magnitude <= tol count as zero.
template <class Scalar>
LieCombination<Scalar> lie_project(const NcSeries<Scalar>& s, double tol = 0.0) {
  using Traits = ScalarTraits<Scalar>;
  if (!detail::negligible(s.constant(), tol)) throw NotLieElement("lie_project: nonzero constant term");
  LieCombination<Scalar> out(s.alphabet(), s.order());
  for (int d = 1; d <= s.order(); ++d) {
    const std::size_t n = s.block_size(d);
    std::vector<Scalar> residual(n);
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
      residual[k] = s.at(d, k);
      any = any || !Traits::is_zero(residual[k]);
    }
    if (!any) continue;
    for (std::size_t k = 0; k < n; ++k) {
      if (detail::negligible(residual[k], tol)) continue;
      Word w = s.word_at(d, k);
      if (!is_lyndon(w))
        throw NotLieElement("lie_project: non-Lie residual at word " + word_string(w, s.alphabet()));
      const Scalar c = residual[k];
      for (const auto& [u, m] : lyndon_expansion(w)) {
        std::size_t idx = s.index(u) - s.index(Word(static_cast<std::size_t>(d), 0));
        residual[idx] -= c * Traits::from_rational(Rational(static_cast<long>(m)));
      }
      out.add(w, c);
    }
  }
  return out;
}

/// "1/12 [A,[A,B]] + 1/12 [[A,B],B]" for one degree; "0" when empty.
template <class Scalar>
std::string format_degree(const LieCombination<Scalar>& lie, int degree) {
  using Traits = ScalarTraits<Scalar>;
  std::string out;
  for (const auto& [w, c] : lie.degree_terms(degree)) {
    std::string coeff = Traits::str(c);
    bool negative = !coeff.empty() && coeff[0] == '-' &&
                    coeff.find_first_of("+-", 1) == std::string::npos;
    if (negative) coeff.erase(0, 1);
    if (coeff.find_first_of("+- ") != std::string::npos) coeff = "(" + coeff + ")";
    if (out.empty())
      out += negative ? "-" : "";
    else
      out += negative ? " - " : " + ";
    if (coeff != "1") out += coeff + " ";
    out += lyndon_bracket_string(w, lie.alphabet());
  }
  return out.empty() ? "0" : out;
}


/// exp(c * g) for a Lie element g, truncated at `order`. Words of g longer
/// than the truncation are dropped.
template <class Scalar>
NcSeries<Scalar> stage_exp(const LieCombination<Scalar>& g, const Scalar& c, int order) {
  if (order < 1) throw std::invalid_argument("stage_exp: order must be >= 1");
  if (g.min_degree() < 1) throw std::invalid_argument("stage_exp: Lie element must have degree >= 1");
  LieCombination<Scalar> trimmed(g.alphabet(), order);
  for (const auto& [w, x] : g.terms()) trimmed.add(w, x);
  return stage_exp(trimmed.expand(), c);
}

/// Word expansion of a bracket tree as a series.
template <class Scalar>
NcSeries<Scalar> bracket_series(const Bracket& b, const Alphabet& alphabet, int order) {
  NcSeries<Scalar> out(alphabet, order);
  for (const auto& [w, n] : bracket_expansion(b))
    if (static_cast<int>(w.size()) <= order) out.at(w) += ScalarTraits<Scalar>::from_rational(Rational(static_cast<long>(n)));
  return out;
}

}  // namespace expprod
