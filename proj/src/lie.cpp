#include "expprod/lie.hpp"

namespace expprod {

namespace {

std::map<Word, long long> commutator(const std::map<Word, long long>& a,
                                     const std::map<Word, long long>& b) {
  std::map<Word, long long> out;
  auto add = [&out](Word w, long long c) {
    auto& slot = out[w];
    slot += c;
    if (slot == 0) out.erase(w);
  };
  for (const auto& [u, cu] : a)
    for (const auto& [v, cv] : b) {
      Word uv = u;
      uv.insert(uv.end(), v.begin(), v.end());
      Word vu = v;
      vu.insert(vu.end(), u.begin(), u.end());
      add(std::move(uv), cu * cv);
      add(std::move(vu), -cu * cv);
    }
  return out;
}

}  // namespace

std::map<Word, long long> lyndon_expansion(const Word& w) {
  if (w.empty()) throw std::invalid_argument("lyndon_expansion: empty word");
  if (w.size() == 1) return {{w, 1}};
  auto [u, v] = standard_factorization(w);
  return commutator(lyndon_expansion(u), lyndon_expansion(v));
}

std::map<Word, long long> bracket_expansion(const Bracket& b) {
  if (b.is_leaf()) {
    if (b.leaf < 0) throw std::invalid_argument("bracket leaf without generator");
    return {{Word{b.leaf}, 1}};
  }
  if (b.children.size() != 2) throw std::invalid_argument("bracket node needs two children");
  return commutator(bracket_expansion(b.children[0]), bracket_expansion(b.children[1]));
}

std::string bracket_string(const Bracket& b, const Alphabet& alphabet) {
  if (b.is_leaf()) return alphabet.at(static_cast<std::size_t>(b.leaf));
  return "[" + bracket_string(b.children[0], alphabet) + "," + bracket_string(b.children[1], alphabet) + "]";
}

}  // namespace expprod
