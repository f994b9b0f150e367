#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <fstream>
#include <tuple>

#include "expprod/qmc.hpp"
#include "oracles.hpp"

using namespace expprod;

namespace {

using BondList = std::vector<std::tuple<int, int, double>>;

BondList bond_list(const IsingModel& m) {
  BondList out;
  for (const auto& b : m.bonds) out.emplace_back(b.i, b.j, b.J);
  return out;
}

IsingModel pair_model() { return chain(2, 1.0, 1.0, 1.0); }

IsingModel single_spin(double gamma, double beta) {
  IsingModel m;
  m.sites = 1;
  m.gamma = gamma;
  m.beta = beta;
  return m;
}

IsingModel frustrated() {
  IsingModel m;
  m.sites = 4;
  m.bonds = {{0, 1, -1.0}, {0, 2, -2.0}, {0, 3, 0.5}, {1, 3, -1.0}, {2, 3, 0.5}};
  m.gamma = 1.0;
  m.beta = 4.0;
  return m;
}

nlohmann::json read_json(const std::string& name) {
  std::ifstream in(std::string(EXPPROD_DATA_DIR) + "/" + name);
  return nlohmann::json::parse(in);
}

}  // namespace

// ---------------------------------------------------------------------------
// Couplings and action
// ---------------------------------------------------------------------------

TEST(Couplings, KnownValue) {
  const auto c = couplings(single_spin(1.0, 1.0), 2);
  EXPECT_DOUBLE_EQ(c.epsilon, 0.5);
  EXPECT_NEAR(c.gamma_n, 0.3859684164, 1e-10);
  EXPECT_EQ(c.gamma_n, -0.5 * std::log(std::tanh(0.5)));
  EXPECT_EQ(c.delta_n, 0.5 * std::log(0.5 * std::sinh(1.0)));
}

TEST(Couplings, DefiningPairAcrossRange) {
  for (double eps = 1e-3; eps <= 10.0; eps *= 1.25) {
    const auto c = couplings(single_spin(eps, 1.0), 1);
    EXPECT_NEAR(std::exp(c.gamma_n + c.delta_n) / std::cosh(eps), 1.0, 1e-14) << eps;
    EXPECT_NEAR(std::exp(-c.gamma_n + c.delta_n) / std::sinh(eps), 1.0, 1e-14) << eps;
  }
}

TEST(Couplings, LayersLockAsTrotterNumberGrows) {
  const IsingModel m = single_spin(1.0, 1.0);
  double prev = 0.0;
  for (int n : {1, 4, 16, 64, 256, 1024}) {
    const double g = couplings(m, n).gamma_n;
    EXPECT_GT(g, prev);
    prev = g;
  }
  EXPECT_GT(prev, 3.0);
}

TEST(Couplings, ZeroFieldIsFrozen) {
  EXPECT_THROW(couplings(single_spin(0.0, 1.0), 4), FrozenTrotterError);
  EXPECT_THROW(WorldlineSampler(single_spin(0.0, 1.0), 4, 1), FrozenTrotterError);
  EXPECT_THROW(couplings(single_spin(1.0, 1.0), 0), std::invalid_argument);
}

TEST(Action, UniformConfiguration) {
  const IsingModel m = frustrated();
  const int n = 5;
  const auto c = couplings(m, n);
  const WorldlineConfig s(m.sites, n, 1);
  double jsum = 0.0;
  for (const auto& b : m.bonds) jsum += b.J;
  EXPECT_NEAR(classical_action(m, c, s), m.beta / n * n * jsum + c.gamma_n * n * m.sites, 1e-12);
}

TEST(Action, SmallestInstance) {
  const IsingModel m = single_spin(1.0, 1.0);
  const auto c = couplings(m, 2);
  for (int a : {-1, 1})
    for (int b : {-1, 1}) {
      WorldlineConfig s(1, 2);
      s.set(0, 0, a);
      s.set(0, 1, b);
      EXPECT_NEAR(classical_action(m, c, s), c.gamma_n * 2 * a * b, 1e-15);
    }
}

TEST(Action, PeriodicTrotterIndex) {
  WorldlineConfig s(2, 3);
  s.set(1, 0, -1);
  EXPECT_EQ(s.at(1, 3), -1);
  EXPECT_EQ(s.at(1, -3), -1);
  EXPECT_EQ(s.at(1, 2), 1);
}

TEST(Action, FlipDeltaMatchesRecompute) {
  const IsingModel m = frustrated();
  const auto c = couplings(m, 6);
  std::mt19937_64 rng(3);
  WorldlineConfig s(m.sites, 6);
  for (int l = 0; l < 6; ++l)
    for (int i = 0; i < m.sites; ++i) s.set(i, l, (rng() & 1) ? 1 : -1);
  for (int i = 0; i < m.sites; ++i)
    for (int l = 0; l < 6; ++l) {
      const double before = classical_action(m, c, s);
      const double d = flip_delta(m, c, s, i, l);
      s.flip(i, l);
      EXPECT_NEAR(classical_action(m, c, s) - before, d, 1e-12);
    }
}

TEST(Action, RunningActionMatchesRecomputeAfterManySweeps) {
  const IsingModel m = frustrated();
  WorldlineSampler sampler(m, 8, 77);
  for (int k = 0; k < 10000; ++k) sampler.sweep();
  EXPECT_NEAR(sampler.action(), classical_action(m, sampler.couplings(), sampler.config()), 1e-9);
}

// ---------------------------------------------------------------------------
// Exact references
// ---------------------------------------------------------------------------

TEST(Exact, EnumerationMatchesMatrixProductTrace) {
  for (const IsingModel& m : {single_spin(0.8, 1.3), chain(2, 1.3, 0.7, 1.2), pair_model()}) {
    const auto parts = oracle::ising_parts(m.sites, bond_list(m), m.gamma);
    for (int n = 1; n * m.sites <= 16; ++n) {
      const double trace = oracle::trotter_trace(parts, m.beta, n);
      EXPECT_NEAR(exact_reference(m, n).log_z, std::log(trace), 1e-12) << m.sites << " sites, n = " << n;
    }
  }
}

TEST(Exact, SingleSpinSigmaX) {
  const auto e = exact_reference(single_spin(1.0, 1.0), kInfiniteTrotter);
  EXPECT_NEAR(e.sigma_x, 0.7615941559557649, 1e-14);
  EXPECT_NEAR(e.log_z, std::log(2 * std::cosh(1.0)), 1e-14);
}

TEST(Exact, DiagonalizationMatchesMatrixExponential) {
  const IsingModel m = frustrated();
  const auto e = exact_reference(m, kInfiniteTrotter);
  const auto parts = oracle::ising_parts(m.sites, bond_list(m), m.gamma);
  const Eigen::MatrixXd h = parts.a + parts.b;
  Eigen::Matrix2d z, x;
  z << 1, 0, 0, -1;
  x << 0, 1, 1, 0;
  for (std::size_t k = 0; k < m.bonds.size(); ++k) {
    const auto& b = m.bonds[k];
    const Eigen::MatrixXd zz = oracle::site_operator(z, b.i, m.sites) * oracle::site_operator(z, b.j, m.sites);
    EXPECT_NEAR(e.zz[k], oracle::thermal_average(h, zz, m.beta), 1e-10);
  }
  Eigen::MatrixXd sx_total = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  for (int i = 0; i < m.sites; ++i) sx_total += oracle::site_operator(x, i, m.sites);
  EXPECT_NEAR(e.sigma_x, oracle::thermal_average(h, sx_total, m.beta) / m.sites, 1e-10);
  EXPECT_NEAR(e.log_z, std::log(Eigen::MatrixXd((-m.beta * h).exp()).trace()), 1e-10);
}

TEST(Exact, FiniteSigmaXIsFieldDerivative) {
  // sigma_x = (1 / (beta N)) d ln Z_n / d gamma
  IsingModel m = pair_model();
  const int n = 4;
  const double h = 1e-5;
  IsingModel up = m, down = m;
  up.gamma += h;
  down.gamma -= h;
  const double deriv = (exact_reference(up, n).log_z - exact_reference(down, n).log_z) / (2 * h);
  EXPECT_NEAR(exact_reference(m, n).sigma_x, deriv / (m.beta * m.sites), 1e-8);
}

TEST(Exact, SingleLayerIsClassical) {
  const auto e = exact_reference(single_spin(1.0, 1.0), 1);
  EXPECT_NEAR(e.sigma_x, std::tanh(1.0), 1e-14);
}

TEST(Exact, MonotoneApproachWithTrotterNumber) {
  const IsingModel m = pair_model();
  const double inf = exact_reference(m, kInfiniteTrotter).zz[0];
  double prev = 1e9;
  for (int n : {2, 4, 8}) {
    const double gap = std::abs(exact_reference(m, n).zz[0] - inf);
    EXPECT_LT(gap, prev) << n;
    prev = gap;
  }
}

TEST(Exact, FrozenRegressionValues) {
  const IsingModel m = pair_model();
  EXPECT_NEAR(exact_reference(m, kInfiniteTrotter).zz[0], 0.516908, 1e-6);
  EXPECT_NEAR(exact_reference(m, 2).zz[0], 0.602187, 1e-6);
  EXPECT_NEAR(exact_reference(m, 8).zz[0], 0.522843, 1e-6);
}

TEST(Exact, ResourceCaps) {
  EXPECT_THROW(exact_reference(chain(5, 1.0, 1.0, 1.0), 5), ResourceError);
  EXPECT_THROW(exact_reference(chain(13, 1.0, 1.0, 1.0), kInfiniteTrotter), ResourceError);
  EXPECT_NO_THROW(exact_reference(chain(12, 1.0, 1.0, 1.0), 2));
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

TEST(Metropolis, DeterministicForFixedSeed) {
  const IsingModel m = frustrated();
  const auto a = metropolis_run(m, 8, 4000, 400, 99, 20, true);
  const auto b = metropolis_run(m, 8, 4000, 400, 99, 20, true);
  ASSERT_EQ(a.observables.size(), b.observables.size());
  for (std::size_t k = 0; k < a.observables.size(); ++k) {
    EXPECT_EQ(a.observables[k].mean, b.observables[k].mean);
    EXPECT_EQ(a.observables[k].stderr_, b.observables[k].stderr_);
  }
  EXPECT_EQ(a.traces, b.traces);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  const auto c = metropolis_run(m, 8, 4000, 400, 100);
  EXPECT_NE(a.get("energy_diag").mean, c.get("energy_diag").mean);
}

TEST(Metropolis, RejectsBadRunShape) {
  const IsingModel m = pair_model();
  EXPECT_THROW(metropolis_run(m, 4, 100, 100, 1), std::invalid_argument);
  EXPECT_THROW(metropolis_run(m, 4, 1000, 10, 1, 10), std::invalid_argument);
}

TEST(Metropolis, DecoupledSpinsAreUncorrelated) {
  IsingModel m = chain(2, 0.0, 1.0, 1.0);
  const auto r = metropolis_run(m, 8, 40000, 4000, 5);
  const auto& zz = r.get("zz[0,1]");
  EXPECT_LE(std::abs(zz.mean), 3 * zz.stderr_);
  EXPECT_GT(zz.stderr_, 0.0);
}

TEST(Metropolis, DetailedBalanceOnFourConfigurations) {
  const IsingModel m = single_spin(1.0, 1.0);
  const auto c = couplings(m, 2);
  // exhaustive weights exp(2 gamma_2 s0 s1) for (s0, s1) in {++, +-, -+, --}
  std::array<double, 4> p{};
  double z = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int s0 = (k & 1) ? -1 : 1;
    const int s1 = (k & 2) ? -1 : 1;
    p[static_cast<std::size_t>(k)] = std::exp(2 * c.gamma_n * s0 * s1);
    z += p[static_cast<std::size_t>(k)];
  }
  for (auto& x : p) x /= z;

  WorldlineSampler sampler(m, 2, 2718);
  for (int k = 0; k < 1000; ++k) sampler.sweep();
  const int bins = 20;
  const int per_bin = 10000;
  std::vector<std::array<double, 4>> freq(bins);
  for (int b = 0; b < bins; ++b) {
    freq[static_cast<std::size_t>(b)].fill(0.0);
    for (int k = 0; k < per_bin; ++k) {
      sampler.sweep();
      const auto& s = sampler.config();
      const int idx = (s.at(0, 0) < 0 ? 1 : 0) + (s.at(0, 1) < 0 ? 2 : 0);
      freq[static_cast<std::size_t>(b)][static_cast<std::size_t>(idx)] += 1.0 / per_bin;
    }
  }
  double chi2 = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    double mean = 0.0, var = 0.0;
    for (const auto& f : freq) mean += f[k] / bins;
    for (const auto& f : freq) var += (f[k] - mean) * (f[k] - mean) / (bins - 1);
    const double se = std::sqrt(var / bins);
    EXPECT_LE(std::abs(mean - p[k]), 3 * se) << k;
    chi2 += (mean - p[k]) * (mean - p[k]) / (se * se);
  }
  // 99.9% point of chi-square with 4 degrees of freedom
  EXPECT_LT(chi2, 18.47);
}

TEST(Metropolis, AgreesWithEnumerationAtFiniteN) {
  const IsingModel m = pair_model();
  const auto e = exact_reference(m, 8);
  const auto r = metropolis_run(m, 8, 100000, 10000, 8);
  for (const auto& [name, value] : std::vector<std::pair<std::string, double>>{
           {"zz[0,1]", e.zz[0]}, {"trotter_corr", e.trotter_corr}, {"sigma_x", e.sigma_x}, {"energy_diag", e.energy_diag}}) {
    const auto& o = r.get(name);
    EXPECT_LE(std::abs(o.mean - value), 3 * o.stderr_) << name << " " << o.mean << " vs " << value;
  }
}

TEST(Metropolis, SixteenLayersAgainstDiagonalization) {
  const IsingModel m = pair_model();
  const double ed = exact_reference(m, kInfiniteTrotter).zz[0];
  const auto r = metropolis_run(m, 16, 100000, 10000, 16);
  const auto& zz = r.get("zz[0,1]");
  EXPECT_LE(std::abs(zz.mean - ed), 3 * zz.stderr_) << zz.mean << " +- " << zz.stderr_ << " vs " << ed;
}

// ---------------------------------------------------------------------------
// Extrapolation
// ---------------------------------------------------------------------------

TEST(Extrapolation, ExactValuesReachDiagonalization) {
  const IsingModel m = pair_model();
  const double ed = exact_reference(m, kInfiniteTrotter).zz[0];
  std::vector<int> ns{8, 10, 12};
  std::vector<double> values;
  for (int n : ns) values.push_back(exact_reference(m, n).zz[0]);
  const auto rep = extrapolate(ns, values, {});
  ASSERT_TRUE(rep.ok) << rep.diagnostics;
  EXPECT_NEAR(rep.c0, ed, 1e-4);
  EXPECT_TRUE(rep.dominant_power == 1 || rep.dominant_power == 2);
  for (double r : rep.residuals) EXPECT_NEAR(r, 0.0, 1e-12);
}

TEST(Extrapolation, RecoversSyntheticCoefficients) {
  std::vector<int> ns{2, 3, 5, 8, 13};
  std::vector<double> values;
  for (int n : ns) values.push_back(0.25 - 0.5 / n + 2.0 / (n * n));
  const auto rep = extrapolate(ns, values, {});
  EXPECT_NEAR(rep.c0, 0.25, 1e-12);
  EXPECT_NEAR(rep.c1, -0.5, 1e-11);
  EXPECT_NEAR(rep.c2, 2.0, 1e-11);
  EXPECT_EQ(rep.dominant_power, 2);
}

TEST(Extrapolation, MonteCarloWithinCombinedErrors) {
  const IsingModel m = pair_model();
  const double ed = exact_reference(m, kInfiniteTrotter).zz[0];
  const auto rep = trotter_extrapolate(m, {2, 4, 8, 16}, 200000, 20000, 11, "zz[0,1]");
  ASSERT_TRUE(rep.ok) << rep.diagnostics;
  EXPECT_GT(rep.c0_stderr, 0.0);
  EXPECT_LE(std::abs(rep.c0 - ed), 3 * rep.c0_stderr) << rep.c0 << " +- " << rep.c0_stderr;
}

TEST(Extrapolation, InputErrors) {
  EXPECT_THROW(extrapolate({4, 8, 8}, {0.1, 0.2, 0.3}, {}), std::invalid_argument);
  EXPECT_THROW(trotter_extrapolate(pair_model(), {4, 4, 8}, 1000, 100, 1, "zz[0,1]"), std::invalid_argument);
  const auto two = extrapolate({4, 8}, {0.1, 0.2}, {});
  EXPECT_FALSE(two.ok);
  EXPECT_FALSE(two.diagnostics.empty());
}

// ---------------------------------------------------------------------------
// Annealing
// ---------------------------------------------------------------------------

TEST(Anneal, FerromagneticChainReachesGroundState) {
  const IsingModel m = chain(6, 1.0, 1.0, 4.0);
  EXPECT_EQ(oracle::ground_energy(6, bond_list(m)), -5.0);
  int hits = 0;
  for (std::uint64_t seed = 1000; seed < 1020; ++seed) {
    const auto r = anneal(m, 4, geometric_schedule(3.0, 0.01, 50), 10, seed);
    if (r.energy == -5.0) ++hits;
  }
  EXPECT_GE(hits, 19);
}

TEST(Anneal, SlowScheduleBeatsQuenchOnFrustratedInstance) {
  const IsingModel m = frustrated();
  const double ground = oracle::ground_energy(4, bond_list(m));
  EXPECT_EQ(ground, -4.0);
  int slow = 0, quench = 0;
  for (std::uint64_t seed = 1000; seed < 1050; ++seed) {
    if (anneal(m, 4, geometric_schedule(3.0, 0.01, 50), 10, seed).energy == ground) ++slow;
    if (anneal(m, 4, {0.01}, 10, seed).energy == ground) ++quench;
  }
  EXPECT_GT(slow, 25);
  EXPECT_GT(slow, quench);
}

TEST(Anneal, ReportedLayerMatchesEnergy) {
  const IsingModel m = frustrated();
  const auto r = anneal(m, 4, geometric_schedule(2.0, 0.05, 10), 5, 3);
  ASSERT_EQ(r.configuration.size(), 4u);
  double e = 0.0;
  for (const auto& b : m.bonds)
    e -= b.J * r.configuration[static_cast<std::size_t>(b.i)] * r.configuration[static_cast<std::size_t>(b.j)];
  EXPECT_EQ(e, r.energy);
}

TEST(Anneal, ScheduleHandling) {
  const IsingModel m = chain(3, 1.0, 1.0, 2.0);
  const auto r = anneal(m, 4, {1.0, 0.1, 0.0}, 2, 1);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("clamped"), std::string::npos);
  EXPECT_THROW(anneal(m, 4, {0.1, 1.0}, 2, 1), std::invalid_argument);
  EXPECT_THROW(anneal(m, 4, {}, 2, 1), std::invalid_argument);
  const auto g = geometric_schedule(3.0, 0.01, 5);
  EXPECT_DOUBLE_EQ(g.front(), 3.0);
  EXPECT_NEAR(g.back(), 0.01, 1e-15);
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

TEST(ModelJson, ShippedModelsParse) {
  const IsingModel c6 = model_from_json(read_json("chain6.json"));
  EXPECT_EQ(c6.sites, 6);
  EXPECT_EQ(c6.bonds.size(), 5u);
  EXPECT_EQ(c6.beta, 2.0);
  const IsingModel f4 = model_from_json(read_json("frustrated4.json"));
  EXPECT_EQ(oracle::ground_energy(f4.sites, bond_list(f4)), -4.0);
  const IsingModel back = model_from_json(to_json(c6));
  EXPECT_EQ(to_json(back), to_json(c6));
}

TEST(ModelJson, RejectsBadInput) {
  EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"sites": 2, "bonds": [[0,1,1]], "extra": 1})")),
               std::invalid_argument);
  EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"sites": 2, "bonds": [[0,1,1],[1,0,2]]})")),
               std::invalid_argument);
  EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"sites": 2, "bonds": [[0,2,1]]})")), std::invalid_argument);
  EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"sites": 2, "bonds": [], "beta": 0})")),
               std::invalid_argument);
}
