#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "expprod/algebraic.hpp"
#include "expprod/polynomial.hpp"
#include "expprod/rational.hpp"

namespace expprod {

// ---------------------------------------------------------------------------
// Scalar traits
// ---------------------------------------------------------------------------

template <class Scalar>
struct ScalarTraits;

template <>
struct ScalarTraits<Rational> {
  static bool is_zero(const Rational& x) { return x == 0; }
  static Rational from_rational(const Rational& q) { return q; }
  static std::string str(const Rational& x) { return to_string(x); }
  static constexpr bool exact = true;
};

template <>
struct ScalarTraits<Polynomial> {
  static bool is_zero(const Polynomial& x) { return x.is_zero(); }
  static Polynomial from_rational(const Rational& q) { return Polynomial(q); }
  static std::string str(const Polynomial& x) { return to_string(x); }
  static constexpr bool exact = true;
};

template <>
struct ScalarTraits<AlgebraicNumber> {
  static bool is_zero(const AlgebraicNumber& x) { return x.is_zero(); }
  static AlgebraicNumber from_rational(const Rational& q) { return AlgebraicNumber(q); }
  static std::string str(const AlgebraicNumber& x) { return to_string(x); }
  static constexpr bool exact = true;
};

template <>
struct ScalarTraits<double> {
  static bool is_zero(double x) { return x == 0.0; }
  static double from_rational(const Rational& q) { return q.get_d(); }
  static std::string str(double x) { return std::to_string(x); }
  static constexpr bool exact = false;
};

// ---------------------------------------------------------------------------
// Words over a finite alphabet
// ---------------------------------------------------------------------------

/// A generator of the free algebra: dense 0-based id plus a short label.
struct Generator {
  int id = 0;
  std::string label;
};

/// Ordered generator labels; position is the generator id and the letter
/// order used for Lyndon words.
using Alphabet = std::vector<std::string>;

using Word = std::vector<int>;

/// Lyndon test: strictly smaller than every proper rotation.
bool is_lyndon(const Word& w);

/// Standard factorization w = u v with v the longest proper Lyndon suffix.
std::pair<Word, Word> standard_factorization(const Word& w);

/// All Lyndon words of the given length, in lexicographic order.
std::vector<Word> lyndon_words(int alphabet_size, int length);

/// "AAB" style rendering.
std::string word_string(const Word& w, const Alphabet& alphabet);

/// Right-normed standard bracketing of a Lyndon word, e.g. "[A,[A,B]]".
std::string lyndon_bracket_string(const Word& w, const Alphabet& alphabet);

std::size_t ipow(std::size_t base, int exp);

// ---------------------------------------------------------------------------
// NcSeries
// ---------------------------------------------------------------------------

/// Truncated power series in noncommuting generators.
///
/// Coefficients of all words up to `order` letters are stored densely,
/// degree-graded and lexicographically ordered inside each degree. The
/// truncation order is fixed at construction; products never extend it.
template <class Scalar>
class NcSeries {
 public:
  using Traits = ScalarTraits<Scalar>;

  NcSeries(Alphabet alphabet, int order) : alphabet_(std::move(alphabet)), order_(order) {
    if (order < 1) throw std::invalid_argument("truncation order must be >= 1");
    if (alphabet_.empty()) throw std::invalid_argument("empty generator alphabet");
    offsets_.resize(static_cast<std::size_t>(order_) + 2);
    offsets_[0] = 0;
    for (int d = 0; d <= order_; ++d) offsets_[d + 1] = offsets_[d] + block_size(d);
    coeffs_.assign(offsets_.back(), Scalar{});
  }

  static NcSeries identity(const Alphabet& alphabet, int order) {
    NcSeries s(alphabet, order);
    s.coeffs_[0] = Traits::from_rational(Rational(1));
    return s;
  }

  static NcSeries generator(const Alphabet& alphabet, int order, int id) {
    NcSeries s(alphabet, order);
    s.at(Word{id}) = Traits::from_rational(Rational(1));
    return s;
  }

  const Alphabet& alphabet() const { return alphabet_; }
  int order() const { return order_; }
  std::size_t alphabet_size() const { return alphabet_.size(); }
  std::size_t block_size(int degree) const { return ipow(alphabet_.size(), degree); }

  std::size_t index(const Word& w) const {
    if (static_cast<int>(w.size()) > order_) throw std::out_of_range("word exceeds truncation order");
    std::size_t idx = 0;
    for (int letter : w) {
      if (letter < 0 || static_cast<std::size_t>(letter) >= alphabet_.size())
        throw std::out_of_range("letter outside alphabet");
      idx = idx * alphabet_.size() + static_cast<std::size_t>(letter);
    }
    return offsets_[w.size()] + idx;
  }

  Word word_at(int degree, std::size_t local) const {
    Word w(static_cast<std::size_t>(degree));
    for (int k = degree - 1; k >= 0; --k) {
      w[static_cast<std::size_t>(k)] = static_cast<int>(local % alphabet_.size());
      local /= alphabet_.size();
    }
    return w;
  }

  Scalar& at(const Word& w) { return coeffs_[index(w)]; }
  const Scalar& at(const Word& w) const { return coeffs_[index(w)]; }
  Scalar& at(int degree, std::size_t local) { return coeffs_[offsets_[degree] + local]; }
  const Scalar& at(int degree, std::size_t local) const { return coeffs_[offsets_[degree] + local]; }

  const Scalar& constant() const { return coeffs_[0]; }

  /// Nonzero (word, coefficient) pairs in graded lexicographic order.
  std::vector<std::pair<Word, Scalar>> terms() const {
    std::vector<std::pair<Word, Scalar>> out;
    for (int d = 0; d <= order_; ++d)
      for (std::size_t k = 0; k < block_size(d); ++k)
        if (!Traits::is_zero(at(d, k))) out.emplace_back(word_at(d, k), at(d, k));
    return out;
  }

  /// Degree-d homogeneous component as a series of the same shape.
  NcSeries homogeneous(int degree) const {
    NcSeries out(alphabet_, order_);
    if (degree < 0 || degree > order_) return out;
    for (std::size_t k = 0; k < block_size(degree); ++k) out.at(degree, k) = at(degree, k);
    return out;
  }

  bool is_zero() const {
    for (const auto& c : coeffs_)
      if (!Traits::is_zero(c)) return false;
    return true;
  }

  int min_degree() const {
    for (int d = 0; d <= order_; ++d)
      for (std::size_t k = 0; k < block_size(d); ++k)
        if (!Traits::is_zero(at(d, k))) return d;
    return order_ + 1;
  }

  NcSeries& operator+=(const NcSeries& other) {
    check_compatible(other);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += other.coeffs_[k];
    return *this;
  }
  NcSeries& operator-=(const NcSeries& other) {
    check_compatible(other);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= other.coeffs_[k];
    return *this;
  }
  NcSeries& operator*=(const Scalar& c) {
    for (auto& x : coeffs_)
      if (!Traits::is_zero(x)) x = x * c;
    return *this;
  }

  friend NcSeries operator+(NcSeries a, const NcSeries& b) { return a += b; }
  friend NcSeries operator-(NcSeries a, const NcSeries& b) { return a -= b; }
  friend NcSeries operator*(NcSeries a, const Scalar& c) { return a *= c; }
  friend NcSeries operator*(const Scalar& c, NcSeries a) { return a *= c; }

  /// Word-concatenation product truncated at the common order.
  friend NcSeries operator*(const NcSeries& a, const NcSeries& b) {
    a.check_compatible(b);
    NcSeries out(a.alphabet_, a.order_);
    for (int da = 0; da <= a.order_; ++da) {
      const std::size_t na = a.block_size(da);
      for (std::size_t ia = 0; ia < na; ++ia) {
        const Scalar& ca = a.at(da, ia);
        if (Traits::is_zero(ca)) continue;
        for (int db = 0; da + db <= a.order_; ++db) {
          const std::size_t nb = b.block_size(db);
          const std::size_t base = ia * nb;
          for (std::size_t ib = 0; ib < nb; ++ib) {
            const Scalar& cb = b.at(db, ib);
            if (Traits::is_zero(cb)) continue;
            out.at(da + db, base + ib) += ca * cb;
          }
        }
      }
    }
    return out;
  }

  friend bool operator==(const NcSeries& a, const NcSeries& b) {
    return a.alphabet_ == b.alphabet_ && a.order_ == b.order_ && (a - b).is_zero();
  }

  void check_compatible(const NcSeries& other) const {
    if (order_ != other.order_) throw std::invalid_argument("mismatched truncation orders");
    if (alphabet_ != other.alphabet_) throw std::invalid_argument("mismatched generator alphabets");
  }

  /// Applies `f` to every coefficient, producing a series over another scalar.
  template <class Other, class F>
  NcSeries<Other> map(F&& f) const {
    NcSeries<Other> out(alphabet_, order_);
    for (int d = 0; d <= order_; ++d)
      for (std::size_t k = 0; k < block_size(d); ++k) {
        const Scalar& c = at(d, k);
        if (!Traits::is_zero(c)) out.at(d, k) = f(c);
      }
    return out;
  }

 private:
  Alphabet alphabet_;
  int order_;
  std::vector<std::size_t> offsets_;
  std::vector<Scalar> coeffs_;
};

template <class Scalar>
NcSeries<Scalar> series_mul(const NcSeries<Scalar>& a, const NcSeries<Scalar>& b) {
  return a * b;
}

/// exp(c * element) for an element with zero constant term, truncated.
template <class Scalar>
NcSeries<Scalar> stage_exp(const NcSeries<Scalar>& element, const Scalar& c) {
  using Traits = ScalarTraits<Scalar>;
  if (!Traits::is_zero(element.constant()))
    throw std::invalid_argument("stage element must have zero constant term");
  NcSeries<Scalar> x = element * c;
  NcSeries<Scalar> result = NcSeries<Scalar>::identity(element.alphabet(), element.order());
  const int min_deg = element.min_degree();
  if (x.is_zero() || min_deg > element.order()) return result;
  NcSeries<Scalar> power = result;
  for (int k = 1; k * min_deg <= element.order(); ++k) {
    power = power * x;
    power *= Traits::from_rational(make_rational(1, k));
    result += power;
  }
  return result;
}

/// exp(c * g) for a single generator.
template <class Scalar>
NcSeries<Scalar> stage_exp(const Alphabet& alphabet, const Generator& g, const Scalar& c, int order) {
  if (order < 1) throw std::invalid_argument("stage_exp: order must be >= 1");
  return stage_exp(NcSeries<Scalar>::generator(alphabet, order, g.id), c);
}

/// Sum of k >= 1 of (-1)^{k+1} (s - I)^k / k, truncated.
template <class Scalar>
NcSeries<Scalar> series_log(const NcSeries<Scalar>& s) {
  using Traits = ScalarTraits<Scalar>;
  if (!Traits::is_zero(s.constant() - Traits::from_rational(Rational(1))))
    throw std::domain_error("series_log: constant term must equal 1");
  NcSeries<Scalar> y = s - NcSeries<Scalar>::identity(s.alphabet(), s.order());
  NcSeries<Scalar> result(s.alphabet(), s.order());
  NcSeries<Scalar> power = NcSeries<Scalar>::identity(s.alphabet(), s.order());
  for (int k = 1; k <= s.order(); ++k) {
    power = power * y;
    if (power.is_zero()) break;
    Rational w = make_rational(k % 2 == 1 ? 1 : -1, k);
    result += power * Traits::from_rational(w);
  }
  return result;
}

/// exp of a series with zero constant term.
template <class Scalar>
NcSeries<Scalar> series_exp(const NcSeries<Scalar>& s) {
  return stage_exp(s, ScalarTraits<Scalar>::from_rational(Rational(1)));
}

/// One factor exp(coeff * element) of an exponential product.
template <class Scalar>
struct SeriesStage {
  NcSeries<Scalar> element;  ///< zero constant term (a generator or a Lie element)
  Scalar coeff;
};

/// log of the left-to-right product of stage exponentials. The degree-k part
/// is the k-th correction term of the product.
template <class Scalar>
NcSeries<Scalar> product_log(const std::vector<SeriesStage<Scalar>>& stages) {
  if (stages.empty()) throw std::invalid_argument("product_log: empty stage list");
  NcSeries<Scalar> product =
      NcSeries<Scalar>::identity(stages.front().element.alphabet(), stages.front().element.order());
  for (const auto& st : stages) product = product * stage_exp(st.element, st.coeff);
  return series_log(product);
}

/// Convenience overload for generator-only stage lists: (generator id, coeff).
template <class Scalar>
NcSeries<Scalar> product_log(const Alphabet& alphabet, const std::vector<std::pair<int, Scalar>>& stages,
                             int order) {
  if (order < 1) throw std::invalid_argument("product_log: order must be >= 1");
  std::vector<SeriesStage<Scalar>> list;
  list.reserve(stages.size());
  for (const auto& [id, c] : stages) list.push_back({NcSeries<Scalar>::generator(alphabet, order, id), c});
  return product_log(list);
}

}  // namespace expprod
