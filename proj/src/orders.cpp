#include "expprod/orders.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "expprod/lie.hpp"

namespace expprod {

namespace {

Alphabet pattern_alphabet(const std::string& pattern) {
  std::set<char> letters(pattern.begin(), pattern.end());
  Alphabet out;
  for (char c : letters) out.emplace_back(1, c);
  return out;
}

void check_cap(int m, int cap) {
  if (m < 1) throw std::invalid_argument("target order must be >= 1");
  if (m > cap) throw ResourceError(fmt::format("target order {} exceeds truncation cap {}", m, cap));
}

/// Polynomial compiled for repeated long double evaluation.
struct CompiledPolynomial {
  struct Term {
    long double coeff;
    std::vector<std::pair<int, int>> powers;  // (parameter index, exponent)
  };
  std::vector<Term> terms;

  CompiledPolynomial(const Polynomial& p, const std::vector<std::string>& names) {
    for (const auto& [m, c] : p.terms()) {
      Term t{static_cast<long double>(c.get_num().get_d()) / static_cast<long double>(c.get_den().get_d()), {}};
      for (const auto& [v, e] : m) {
        auto it = std::find(names.begin(), names.end(), v);
        if (it == names.end()) throw std::invalid_argument("unbound variable: " + v);
        t.powers.emplace_back(static_cast<int>(it - names.begin()), e);
      }
      terms.push_back(std::move(t));
    }
  }

  long double operator()(const std::vector<long double>& x) const {
    long double sum = 0.0L;
    for (const auto& t : terms) {
      long double v = t.coeff;
      for (const auto& [i, e] : t.powers)
        for (int k = 0; k < e; ++k) v *= x[static_cast<std::size_t>(i)];
      sum += v;
    }
    return sum;
  }
};

template <class Scalar>
int check_log(const NcSeries<Scalar>& log, int slots, int m, double base_tol, double scale) {
  using Traits = ScalarTraits<Scalar>;
  auto small = [&](const Scalar& c, int d) {
    if constexpr (std::is_same_v<Scalar, double>)
      return std::abs(c) <= base_tol * std::pow(scale, d);
    else
      return Traits::is_zero(c);
  };
  for (int g = 0; g < slots; ++g)
    if (!small(log.at(Word{g}) - Traits::from_rational(Rational(1)), 1)) return 0;
  for (int d = 2; d <= m; ++d)
    for (std::size_t k = 0; k < log.block_size(d); ++k)
      if (!small(log.at(d, k), d)) return d - 1;
  return m;
}

bool all_rational(const Scheme& s) {
  return std::all_of(s.stages.begin(), s.stages.end(), [](const Stage& st) { return st.coeff.is_rational(); });
}

}  // namespace

OrderConditionSet order_conditions(const std::string& pattern, int m, int cap) {
  check_cap(m, cap);
  if (pattern.empty()) throw std::invalid_argument("empty pattern");
  const Alphabet alphabet = pattern_alphabet(pattern);
  OrderConditionSet out;
  out.pattern = pattern;
  out.order = m;
  std::vector<SeriesStage<Polynomial>> stages;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    std::string name = fmt::format("p{}", i + 1);
    out.parameters.push_back(name);
    int id = static_cast<int>(std::find(alphabet.begin(), alphabet.end(), std::string(1, pattern[i])) - alphabet.begin());
    stages.push_back({NcSeries<Polynomial>::generator(alphabet, m, id), Polynomial::variable(name)});
  }
  auto lie = lie_project(product_log(stages));
  for (int d = 1; d <= m; ++d)
    for (const Word& w : lyndon_words(static_cast<int>(alphabet.size()), d)) {
      Polynomial eq = lie.coefficient(w);
      if (d == 1) eq -= Polynomial(1);
      out.equations.push_back(std::move(eq));
      out.degrees.push_back(d);
      out.labels.push_back(lyndon_bracket_string(w, alphabet));
    }
  return out;
}

OrderConditionSet condition_set(std::vector<Polynomial> equations) {
  OrderConditionSet out;
  std::set<std::string> names;
  for (const auto& e : equations)
    for (const auto& v : e.variables()) names.insert(v);
  out.parameters.assign(names.begin(), names.end());
  for (auto& e : equations) {
    out.degrees.push_back(0);
    out.labels.push_back(to_string(e));
    out.equations.push_back(std::move(e));
  }
  return out;
}

int verify_order(const Scheme& s, int m, int cap) {
  check_cap(m, cap);
  const int slots = static_cast<int>(s.slots.size());
  if (all_rational(s)) {
    std::vector<SeriesStage<Rational>> stages;
    for (const auto& st : s.stages) {
      Rational c = st.coeff.exact->constant_term();
      if (st.is_commutator())
        stages.push_back({bracket_series<Rational>(st.commutator->bracket, s.slots, m), c});
      else
        stages.push_back({NcSeries<Rational>::generator(s.slots, m, st.slot), c});
    }
    return check_log(product_log(stages), slots, m, 0.0, 1.0);
  }
  double scale = 1.0;
  for (const auto& st : s.stages) scale = std::max(scale, std::abs(st.coeff.value));
  return check_log(product_log(numeric_series_stages(s, m)), slots, m, 1e-12, scale);
}

int verify_order_exact(const Scheme& s, int m, int cap) {
  check_cap(m, cap);
  return check_log(product_log(exact_series_stages(s, m)), static_cast<int>(s.slots.size()), m, 0.0, 1.0);
}

SolveReport solve(const OrderConditionSet& conds, const std::map<std::string, double>& fixed,
                  const std::map<std::string, double>& guess, const SolveOptions& options) {
  const auto& names = conds.parameters;
  std::vector<long double> x(names.size(), 0.0L);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (auto it = fixed.find(names[i]); it != fixed.end()) {
      x[i] = it->second;
    } else {
      auto g = guess.find(names[i]);
      if (g == guess.end()) throw std::invalid_argument("no initial guess for " + names[i]);
      x[i] = g->second;
      free.push_back(i);
    }
  }
  std::vector<CompiledPolynomial> f;
  std::vector<std::vector<CompiledPolynomial>> jac(conds.equations.size());
  for (std::size_t e = 0; e < conds.equations.size(); ++e) {
    f.emplace_back(conds.equations[e], names);
    for (std::size_t j : free) jac[e].emplace_back(conds.equations[e].derivative(names[j]), names);
  }
  const auto ne = static_cast<Eigen::Index>(f.size());
  const auto nf = static_cast<Eigen::Index>(free.size());
  auto residual = [&](const std::vector<long double>& at) {
    Eigen::VectorXd r(ne);
    for (Eigen::Index e = 0; e < ne; ++e) r[e] = static_cast<double>(f[static_cast<std::size_t>(e)](at));
    return r;
  };

  SolveReport report;
  Eigen::VectorXd r = residual(x);
  int iter = 0;
  int nudges = 0;
  int polish = 0;
  for (; iter < options.max_iterations && nf > 0; ++iter) {
    const bool within = r.cwiseAbs().maxCoeff() <= options.tolerance;
    if (within && polish >= options.polish_iterations) break;
    Eigen::MatrixXd J(ne, nf);
    for (Eigen::Index e = 0; e < ne; ++e)
      for (Eigen::Index j = 0; j < nf; ++j)
        J(e, j) = static_cast<double>(jac[static_cast<std::size_t>(e)][static_cast<std::size_t>(j)](x));
    Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-r);
    double t = 1.0;
    const double norm0 = r.norm();
    std::vector<long double> trial = x;
    Eigen::VectorXd rt;
    for (int h = 0; h <= options.max_halvings; ++h) {
      for (Eigen::Index j = 0; j < nf; ++j)
        trial[free[static_cast<std::size_t>(j)]] = x[free[static_cast<std::size_t>(j)]] + t * step[j];
      rt = residual(trial);
      if (rt.norm() < norm0 || h == options.max_halvings) break;
      t *= 0.5;
    }
    if (!(rt.norm() < norm0)) {
      if (within) break;
      // stationary point of the residual norm: shift off it deterministically
      if (nudges >= options.max_nudges) break;
      ++nudges;
      for (std::size_t j : free) x[j] += options.nudge * std::max<long double>(1.0L, std::abs(x[j]));
      r = residual(x);
      continue;
    }
    if (within) ++polish;
    x = trial;
    r = rt;
  }
  report.iterations = iter;
  for (std::size_t i = 0; i < names.size(); ++i) report.solution[names[i]] = static_cast<double>(x[i]);
  report.residuals.assign(r.data(), r.data() + r.size());
  report.max_residual = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  report.converged = std::isfinite(report.max_residual) && report.max_residual <= options.tolerance;
  return report;
}

std::vector<FamilyPoint> ruth_family(const std::vector<double>& p6_values) {
  std::vector<FamilyPoint> out(p6_values.size());
  if (p6_values.empty()) return out;
  const auto conds = order_conditions("ABABAB", 3);
  const std::vector<double> ruth = {7.0 / 24, 2.0 / 3, 3.0 / 4, -2.0 / 3, -1.0 / 24};

  auto run = [&](std::size_t i, const std::vector<double>& seed) {
    std::map<std::string, double> guess;
    for (std::size_t k = 0; k < 5; ++k) guess[fmt::format("p{}", k + 1)] = seed[k];
    auto rep = solve(conds, {{"p6", p6_values[i]}}, guess);
    FamilyPoint& pt = out[i];
    pt.p6 = p6_values[i];
    pt.p.resize(5);
    for (std::size_t k = 0; k < 5; ++k) pt.p[k] = rep.solution.at(fmt::format("p{}", k + 1));
    pt.max_residual = rep.max_residual;
    pt.converged = rep.converged;
  };

  std::size_t start = 0;
  for (std::size_t i = 1; i < p6_values.size(); ++i)
    if (std::abs(p6_values[i] - 1.0) < std::abs(p6_values[start] - 1.0)) start = i;
  run(start, ruth);
  // walk outward in both directions, always seeding from the nearest converged point
  for (int dir : {-1, 1}) {
    std::vector<double> seed = out[start].converged ? out[start].p : ruth;
    for (auto i = static_cast<long>(start) + dir; i >= 0 && i < static_cast<long>(p6_values.size()); i += dir) {
      run(static_cast<std::size_t>(i), seed);
      if (out[static_cast<std::size_t>(i)].converged) seed = out[static_cast<std::size_t>(i)].p;
    }
  }
  return out;
}

SolveReport solve_multistart(const OrderConditionSet& conds, const std::map<std::string, double>& fixed,
                             int starts, std::uint64_t seed, const SolveOptions& options) {
  std::map<std::string, double> guess;
  for (const auto& p : conds.parameters)
    if (!fixed.count(p)) guess[p] = 1.0 / static_cast<double>(conds.parameters.size());
  SolveReport best = solve(conds, fixed, guess, options);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (int k = 0; k < starts && !best.converged; ++k) {
    for (auto& [_, v] : guess) v = uniform(rng);
    SolveReport r = solve(conds, fixed, guess, options);
    if (r.converged || r.max_residual < best.max_residual) best = std::move(r);
  }
  return best;
}

std::string family_csv(const std::vector<FamilyPoint>& curve) {
  std::string out = "p6,p1,p2,p3,p4,p5,max_residual,converged\n";
  for (const auto& pt : curve) {
    out += fmt::format("{:.17g}", pt.p6);
    for (double v : pt.p) out += fmt::format(",{:.17g}", v);
    out += fmt::format(",{:.17g},{}\n", pt.max_residual, pt.converged ? 1 : 0);
  }
  return out;
}

nlohmann::json to_json(const OrderConditionSet& c) {
  nlohmann::json eqs = nlohmann::json::array();
  for (std::size_t i = 0; i < c.equations.size(); ++i)
    eqs.push_back({{"degree", c.degrees[i]}, {"bracket", c.labels[i]}, {"polynomial", to_json(c.equations[i])}});
  return {{"parameters", c.parameters}, {"pattern", c.pattern}, {"order", c.order}, {"equations", eqs}};
}

Scheme scheme_from_pattern(const std::string& pattern, const std::vector<double>& values, int claimed_order) {
  if (pattern.size() != values.size()) throw std::invalid_argument("pattern and value counts differ");
  Scheme s;
  s.name = "solved";
  s.slots = pattern_alphabet(pattern);
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    int slot = s.slot_index(std::string(1, pattern[i]));
    s.stages.push_back(Stage{slot, std::nullopt, StageCoeff::numeric(values[i])});
  }
  s.unmerged = s.stages;
  s.claimed_order = claimed_order;
  validate(s);
  return s;
}

}  // namespace expprod
