#include <algorithm>

#include "expprod/nc_series.hpp"

namespace expprod {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int k = 0; k < exp; ++k) r *= base;
  return r;
}

bool is_lyndon(const Word& w) {
  if (w.empty()) return false;
  const std::size_t n = w.size();
  for (std::size_t r = 1; r < n; ++r) {
    // compare w with its rotation starting at r
    for (std::size_t k = 0; k < n; ++k) {
      int a = w[k];
      int b = w[(r + k) % n];
      if (a < b) break;
      if (a > b) return false;
      if (k + 1 == n) return false;  // equal rotation: periodic word
    }
  }
  return true;
}

std::pair<Word, Word> standard_factorization(const Word& w) {
  for (std::size_t split = 1; split < w.size(); ++split) {
    Word v(w.begin() + static_cast<long>(split), w.end());
    if (is_lyndon(v)) return {Word(w.begin(), w.begin() + static_cast<long>(split)), v};
  }
  return {w, Word{}};
}

std::vector<Word> lyndon_words(int alphabet_size, int length) {
  std::vector<Word> out;
  if (length <= 0 || alphabet_size <= 0) return out;
  const std::size_t total = ipow(static_cast<std::size_t>(alphabet_size), length);
  for (std::size_t k = 0; k < total; ++k) {
    Word w(static_cast<std::size_t>(length));
    std::size_t x = k;
    for (int p = length - 1; p >= 0; --p) {
      w[static_cast<std::size_t>(p)] = static_cast<int>(x % static_cast<std::size_t>(alphabet_size));
      x /= static_cast<std::size_t>(alphabet_size);
    }
    if (is_lyndon(w)) out.push_back(std::move(w));
  }
  return out;
}

std::string word_string(const Word& w, const Alphabet& alphabet) {
  std::string s;
  for (int letter : w) s += alphabet.at(static_cast<std::size_t>(letter));
  return s;
}

std::string lyndon_bracket_string(const Word& w, const Alphabet& alphabet) {
  if (w.size() == 1) return alphabet.at(static_cast<std::size_t>(w.front()));
  auto [u, v] = standard_factorization(w);
  return "[" + lyndon_bracket_string(u, alphabet) + "," + lyndon_bracket_string(v, alphabet) + "]";
}

}  // namespace expprod
