// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <fmt/core.h>

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "expprod/lie.hpp"
#include "expprod/nc_series.hpp"
#include "expprod/orders.hpp"
#include "expprod/propagate.hpp"
#include "expprod/qmc.hpp"
#include "expprod/schemes.hpp"
#include "oracles.hpp"

using namespace expprod;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

Rational q(long n, long d = 1) { return make_rational(n, d); }

Outcome correction_terms() {
  Outcome out;
  const Alphabet ab{"A", "B"};
  const auto phi = product_log(ab, std::vector<std::pair<int, Rational>>{{0, q(1)}, {1, q(1)}}, 3);
  const auto deg2 = lie_project(phi.homogeneous(2));
  const auto deg3 = lie_project(phi.homogeneous(3));
  out.check(deg2.terms().size() == 1 && deg2.coefficient(Word{0, 1}) == q(1, 2), "degree 2 is not [A,B]/2");
  out.check(deg3.terms().size() == 2 && deg3.coefficient(Word{0, 0, 1}) == q(1, 12) &&
                deg3.coefficient(Word{0, 1, 1}) == q(1, 12),
            "degree 3 is not ([A,[A,B]] + [[A,B],B])/12");
  // cross-check against the word-map expansion
  const auto ref = oracle::product_log({{'A', 1}, {'B', 1}}, 3);
  const auto want2 = oracle::bracket("[A,B]", 3);
  const auto want3 = oracle::plus(oracle::bracket("[A,[A,B]]", 3), oracle::bracket("[[A,B],B]", 3));
  for (const auto& [w, c] : want2.terms) out.check(ref.at(w) == c / 2, "oracle degree 2 " + w);
  for (const auto& [w, c] : want3.terms) out.check(ref.at(w) == c / 12, "oracle degree 3 " + w);
  out.detail = out.ok ? fmt::format("{} | {}", format_degree(deg2, 2), format_degree(deg3, 3)) : out.detail;
  return out;
}

Outcome magic_constants() {
  Outcome out;
  struct Case {
    std::string label;
    Polynomial poly;
    double guess;
    double expected;
  };
  const std::vector<Case> cases{
      {"s", triple_defining_polynomial("s", 2), 1.0, 1.351207191959657},
      {"s2", quintuple_defining_polynomial("s", 2), 0.5, 0.414490771794375},
      {"s4", quintuple_defining_polynomial("s", 4), 0.5, 0.373065827733272},
      {"s6", quintuple_defining_polynomial("s", 6), 0.5, 0.359584649349992},
  };
  std::string summary;
  for (const auto& c : cases) {
    const auto rep = solve(condition_set({c.poly}), {}, {{"s", c.guess}});
    const double got = rep.converged ? rep.solution.at("s") : NAN;
    const double err = std::abs(got - c.expected);
    out.check(rep.converged && err <= 1e-14, fmt::format("{} = {:.17g} (err {:.2g})", c.label, got, err));
    summary += fmt::format("{}={:.15f} ", c.label, got);
  }
  if (out.ok) out.detail = summary;
  return out;
}

Outcome ruth_reproduction() {
  Outcome out;
  const std::vector<Rational> p{q(7, 24), q(2, 3), q(3, 4), q(-2, 3), q(-1, 24), q(1)};
  std::map<std::string, Rational> point;
  for (int i = 0; i < 6; ++i) point["p" + std::to_string(i + 1)] = p[static_cast<std::size_t>(i)];
  const auto conds = order_conditions("ABABAB", 3);
  for (std::size_t k = 0; k < conds.equations.size(); ++k)
    out.check(conds.equations[k].evaluate_exact(point) == 0, "condition " + conds.labels[k] + " not exact zero");
  out.check(2 * (p[1] * p[2] + p[1] * p[4] + p[3] * p[4]) == 1, "2q != 1");
  const auto rep =
      solve(conds, {{"p6", 1.0}}, {{"p1", 0.3}, {"p2", 0.6}, {"p3", 0.7}, {"p4", -0.6}, {"p5", -0.05}});
  out.check(rep.converged, "solver did not converge");
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const std::string k = "p" + std::to_string(i + 1);
    worst = std::max(worst, std::abs(rep.solution.at(k) - p[static_cast<std::size_t>(i)].get_d()));
  }
  out.check(worst <= 1e-13, fmt::format("recovered to {:.2g}", worst));
  if (out.ok) out.detail = fmt::format("{} exact conditions, solver error {:.2g}", conds.equations.size(), worst);
  return out;
}

CVector random_state(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(g(rng), g(rng));
  return v.normalized();
}

Outcome empirical_orders() {
  Outcome out;
  std::string summary;
  const std::vector<std::tuple<std::string, double, double>> spin{
      {"strang", 2, 0.2}, {"s4", 4, 0.2}, {"s6", 6, 0.2}, {"s8", 8, 0.3}, {"ruth", 3, 0.2}};
  for (const auto& [name, slope, tol] : spin) {
    const auto rep = converge_spin(find_scheme(name), 0.75);
    out.check(rep.used >= 3 && std::abs(rep.slope - slope) <= tol, fmt::format("{} slope {:.3f}", name, rep.slope));
    summary += fmt::format("{}={:.2f} ", name, rep.slope);
  }
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    const HermitianPart a(random_hermitian(3, rng));
    const HermitianPart b(random_hermitian(3, rng));
    const CVector psi0 = random_state(3, rng);
    const auto rep = converge_unitary(hybrid_fourth(), a, b, psi0, 1.0, geometric_step_counts(4, 512));
    out.check(std::abs(rep.slope - 4.0) <= 0.2, fmt::format("hybrid4 trial {} slope {:.3f}", trial, rep.slope));
    summary += fmt::format("hybrid4={:.2f} ", rep.slope);
  }
  const auto g4 = converge_driven(time_ordered_fourth());
  out.check(std::abs(g4.slope - 4.0) <= 0.2, fmt::format("g4 slope {:.3f}", g4.slope));
  summary += fmt::format("g4={:.2f}", g4.slope);
  if (out.ok) out.detail = summary;
  return out;
}

Outcome structure_preservation() {
  Outcome out;
  const double dt = 1e-4;
  const double period = 4 * kPi / 5;
  const long steps = std::lround(10 * period / dt);

  const auto trot = run_precession(trotter(), 0.75, dt, steps, 10);
  std::vector<double> t, dev;
  double worst = 0.0;
  for (const auto& s : trot) {
    t.push_back(s.t);
    dev.push_back(s.energy - 1.0);
    worst = std::max(worst, std::abs(s.energy - 1.0));
  }
  const double found = dominant_period(t, dev, 0.2, 5.0);
  out.check(worst <= 0.5 * dt, fmt::format("trotter deviation {:.3g}", worst));
  out.check(std::abs(found / period - 1.0) <= 0.02, fmt::format("period {:.5f}", found));

  const auto pert = run_precession(std::nullopt, 0.75, dt, steps, 10);
  const std::size_t tenth = pert.size() / 10;
  double early = 0.0;
  for (std::size_t k = 0; k <= tenth; ++k) early = std::max(early, std::abs(pert[k].energy - 1.0));
  const double late = std::abs(pert.back().energy - 1.0);
  out.check(late > early, fmt::format("perturbative end {:.3g} vs early max {:.3g}", late, early));

  const auto umeno = run_umeno(trotter(), 1e-4, 1000000, 1000);
  double uworst = 0.0;
  for (const auto& s : umeno) uworst = std::max(uworst, std::abs(s.energy - 2.0));
  out.check(uworst <= 1e-3, fmt::format("umeno |E-2| {:.3g}", uworst));

  const auto euler = run_umeno(std::nullopt, 1e-4, 200000, 1000);
  double st = 0, se = 0, stt = 0, ste = 0;
  for (const auto& s : euler) {
    st += s.t;
    se += s.energy;
    stt += s.t * s.t;
    ste += s.t * s.energy;
  }
  const double n = static_cast<double>(euler.size());
  const double slope = (n * ste - st * se) / (n * stt - st * st);
  out.check(slope > 0.0, fmt::format("euler slope {:.3g}", slope));

  double jac = 0.0;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (const auto& h : {harmonic_oscillator(2), umeno_system()}) {
    for (const Scheme& s : scheme_catalog()) {
      if (s.slots.size() != 2) continue;
      bool commutator = false;
      for (const auto& st2 : s.stages) commutator = commutator || st2.is_commutator();
      if (commutator) continue;
      PhasePoint x{Eigen::VectorXd(2), Eigen::VectorXd(2)};
      x.p << u(rng), u(rng);
      x.q << u(rng), u(rng);
      auto map = [&](const PhasePoint& y) { return symplectic_step(s, h, 0.05, y); };
      jac = std::max(jac, std::abs(phase_jacobian(map, x).determinant() - 1.0));
    }
  }
  out.check(jac <= 1e-8, fmt::format("jacobian {:.3g}", jac));
  if (out.ok)
    out.detail = fmt::format("trotter dev {:.3g}, period {:.5f}, pert {:.3g} > {:.3g}, umeno {:.3g}, euler slope {:.3g}, "
                             "|det-1| {:.2g}",
                             worst, found, late, early, uworst, slope, jac);
  return out;
}

Outcome time_ordered() {
  Outcome out;
  std::mt19937_64 rng(10);
  const CMatrix a = random_hermitian(3, rng);
  const CMatrix b = random_hermitian(3, rng);
  const TimeDependentParts parts{[&](double) { return a; }, [&](double) { return b; }};
  const CVector psi0 = random_state(3, rng);
  double worst = 0.0;
  for (const Scheme& s : {time_ordered_first(), time_ordered_second(), time_ordered_fourth()}) {
    const CVector got = timeordered_step(s, parts, 0.7, 0.2, psi0);
    const CVector want = unitary_step(strip_slot(s, "T"), HermitianPart(a), HermitianPart(b), 0.2, psi0);
    worst = std::max(worst, (got - want).norm());
  }
  out.check(worst <= 1e-12, fmt::format("constant parts differ by {:.3g}", worst));

  const Scheme g4 = time_ordered_fourth();
  out.check(!g4.constants.empty(), "g4 has no algebraic constant");
  if (!out.ok) return out;
  const Polynomial s2 = Polynomial::variable(g4.constants[0].name);
  const Polynomial one(q(1));
  const std::vector<Polynomial> expected{s2 * q(1, 2), s2 * q(3, 2), Polynomial(q(1, 2)), one - s2 * q(3, 2),
                                         one - s2 * q(1, 2)};
  const auto times = evaluation_times(g4, 0.0, 1.0);
  out.check(times.size() == 15, fmt::format("{} timed stages", times.size()));
  for (std::size_t k = 0; k < times.size() && k / 3 < expected.size(); ++k) {
    const auto& tau = times[k].tau.exact;
    out.check(tau && reduce_modulo(*tau - expected[k / 3], g4.constants).is_zero(),
              fmt::format("stage {} time {}", k, tau ? to_string(*tau) : "inexact"));
  }
  if (out.ok) out.detail = fmt::format("max difference {:.2g}, 5 exact stage times in {}", worst, g4.constants[0].name);
  return out;
}

Outcome perturbational() {
  Outcome out;
  double worst = 0.0;
  for (const auto& row : perturbational_composition({0.1, 0.5, 1.0, 2.0})) {
    const double want = row.x / std::tanh(row.x);
    worst = std::max(worst, std::abs(row.numeric - want));
  }
  out.check(worst <= 1e-6, fmt::format("max error {:.3g}", worst));
  if (out.ok) out.detail = fmt::format("max |numeric - x coth x| = {:.2g}", worst);
  return out;
}

IsingModel single_spin(double gamma, double beta) {
  IsingModel m;
  m.sites = 1;
  m.gamma = gamma;
  m.beta = beta;
  return m;
}

std::vector<std::tuple<int, int, double>> bond_list(const IsingModel& m) {
  std::vector<std::tuple<int, int, double>> out;
  for (const auto& b : m.bonds) out.emplace_back(b.i, b.j, b.J);
  return out;
}

Outcome qmc_ladder() {
  Outcome out;
  double trace_err = 0.0;
  for (const IsingModel& m : {single_spin(0.8, 1.3), chain(2, 1.3, 0.7, 1.2), chain(2, 1.0, 1.0, 1.0)}) {
    const auto parts = oracle::ising_parts(m.sites, bond_list(m), m.gamma);
    for (int n = 1; n * m.sites <= 16; ++n)
      trace_err = std::max(trace_err, std::abs(exact_reference(m, n).log_z - std::log(oracle::trotter_trace(parts, m.beta, n))));
  }
  out.check(trace_err <= 1e-12, fmt::format("enumeration vs trace {:.3g}", trace_err));

  // four configurations of one spin on two layers
  const IsingModel m1 = single_spin(1.0, 1.0);
  const auto c = couplings(m1, 2);
  std::array<double, 4> p{};
  double z = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int s0 = (k & 1) ? -1 : 1;
    const int s1 = (k & 2) ? -1 : 1;
    p[static_cast<std::size_t>(k)] = std::exp(2 * c.gamma_n * s0 * s1);
    z += p[static_cast<std::size_t>(k)];
  }
  WorldlineSampler sampler(m1, 2, 2718);
  for (int k = 0; k < 1000; ++k) sampler.sweep();
  const int bins = 20, per_bin = 10000;
  std::vector<std::array<double, 4>> freq(bins);
  for (auto& f : freq) {
    f.fill(0.0);
    for (int k = 0; k < per_bin; ++k) {
      sampler.sweep();
      const auto& s = sampler.config();
      f[static_cast<std::size_t>((s.at(0, 0) < 0 ? 1 : 0) + (s.at(0, 1) < 0 ? 2 : 0))] += 1.0 / per_bin;
    }
  }
  double worst_sigma = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    double mean = 0.0, var = 0.0;
    for (const auto& f : freq) mean += f[k] / bins;
    for (const auto& f : freq) var += (f[k] - mean) * (f[k] - mean) / (bins - 1);
    worst_sigma = std::max(worst_sigma, std::abs(mean - p[k] / z) / std::sqrt(var / bins));
  }
  out.check(worst_sigma <= 3.0, fmt::format("detailed balance off by {:.2f} sigma", worst_sigma));

  const IsingModel pair = chain(2, 1.0, 1.0, 1.0);
  const double ed = exact_reference(pair, kInfiniteTrotter).zz[0];
  const auto rep = trotter_extrapolate(pair, {2, 4, 8, 16}, 200000, 20000, 11, "zz[0,1]");
  const double dev = std::abs(rep.c0 - ed);
  out.check(rep.ok && rep.c0_stderr > 0.0 && dev <= 3 * rep.c0_stderr,
            fmt::format("extrapolated {:.6f} +- {:.2g} vs {:.6f}", rep.c0, rep.c0_stderr, ed));
  if (out.ok)
    out.detail = fmt::format("trace {:.2g}, balance {:.2f} sigma, zz {:.5f} +- {:.5f} vs ED {:.5f}", trace_err,
                             worst_sigma, rep.c0, rep.c0_stderr, ed);
  return out;
}

Outcome annealing() {
  Outcome out;
  const IsingModel ferro = chain(6, 1.0, 1.0, 4.0);
  int hits = 0;
  for (std::uint64_t seed = 1000; seed < 1020; ++seed)
    if (anneal(ferro, 4, geometric_schedule(3.0, 0.01, 50), 10, seed).energy == -5.0) ++hits;
  out.check(hits >= 19, fmt::format("chain reached -5 on {}/20", hits));

  IsingModel fr;
  fr.sites = 4;
  fr.bonds = {{0, 1, -1.0}, {0, 2, -2.0}, {0, 3, 0.5}, {1, 3, -1.0}, {2, 3, 0.5}};
  fr.gamma = 1.0;
  fr.beta = 4.0;
  const double ground = oracle::ground_energy(4, bond_list(fr));
  int slow = 0, quench = 0;
  for (std::uint64_t seed = 1000; seed < 1050; ++seed) {
    if (anneal(fr, 4, geometric_schedule(3.0, 0.01, 50), 10, seed).energy == ground) ++slow;
    if (anneal(fr, 4, {0.01}, 10, seed).energy == ground) ++quench;
  }
  out.check(slow > quench, fmt::format("slow {} vs quench {} of 50", slow, quench));
  if (out.ok) out.detail = fmt::format("chain {}/20, frustrated slow {} vs quench {} of 50", hits, slow, quench);
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "correction-term exactness", 1, correction_terms},
      {2, "magic constants", 1, magic_constants},
      {3, "ruth reproduction", 5, ruth_reproduction},
      {4, "empirical orders", 60, empirical_orders},
      {5, "structure preservation", 120, structure_preservation},
      {6, "time-ordered correctness", 5, time_ordered},
      {7, "perturbational composition", 1, perturbational},
      {8, "qmc exactness ladder", 600, qmc_ladder},
      {9, "annealing sanity", 600, annealing},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) {
      o.ok = false;
      o.detail += fmt::format(" (over time limit {}s)", c.limit_s);
    }
    if (!o.ok) ++failures;
    fmt::print("criterion {}: {} {} [{:.2f}s] {}\n", c.id, o.ok ? "PASS" : "FAIL", c.name, secs, o.detail);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
