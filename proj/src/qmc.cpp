#include "expprod/qmc.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

namespace expprod {

void validate(const IsingModel& m) {
  if (m.sites <= 0) throw std::invalid_argument("model needs at least one site");
  if (!(m.beta > 0.0) || !std::isfinite(m.beta)) throw std::invalid_argument("beta must be positive");
  if (!(m.gamma >= 0.0) || !std::isfinite(m.gamma)) throw std::invalid_argument("gamma must be non-negative");
  std::set<std::pair<int, int>> seen;
  for (const auto& b : m.bonds) {
    if (b.i < 0 || b.j < 0 || b.i >= m.sites || b.j >= m.sites)
      throw std::invalid_argument(fmt::format("bond ({}, {}) out of range", b.i, b.j));
    if (b.i == b.j) throw std::invalid_argument(fmt::format("self bond on site {}", b.i));
    if (!std::isfinite(b.J)) throw std::invalid_argument("non-finite coupling");
    if (!seen.emplace(std::min(b.i, b.j), std::max(b.i, b.j)).second)
      throw std::invalid_argument(fmt::format("duplicate bond ({}, {})", b.i, b.j));
  }
}

IsingModel model_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"sites", "bonds", "gamma", "beta"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw std::invalid_argument(fmt::format("unknown model key '{}'", key));
  IsingModel m;
  m.sites = j.at("sites").get<int>();
  for (const auto& b : j.at("bonds")) {
    if (!b.is_array() || b.size() != 3) throw std::invalid_argument("bond must be [i, j, J]");
    m.bonds.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<double>()});
  }
  m.gamma = j.value("gamma", 1.0);
  m.beta = j.value("beta", 1.0);
  validate(m);
  return m;
}

nlohmann::json to_json(const IsingModel& m) {
  nlohmann::json bonds = nlohmann::json::array();
  for (const auto& b : m.bonds) bonds.push_back({b.i, b.j, b.J});
  return {{"sites", m.sites}, {"bonds", bonds}, {"gamma", m.gamma}, {"beta", m.beta}};
}

IsingModel chain(int sites, double J, double gamma, double beta) {
  IsingModel m;
  m.sites = sites;
  for (int i = 0; i + 1 < sites; ++i) m.bonds.push_back({i, i + 1, J});
  m.gamma = gamma;
  m.beta = beta;
  validate(m);
  return m;
}

TrotterCouplings couplings(const IsingModel& m, int n) {
  if (n < 1) throw std::invalid_argument("Trotter number must be at least 1");
  if (!(m.gamma > 0.0))
    throw FrozenTrotterError("transverse field is zero: Trotter layers are frozen copies (gamma_n diverges)");
  TrotterCouplings c;
  c.n = n;
  c.epsilon = m.beta * m.gamma / n;
  c.gamma_n = -0.5 * std::log(std::tanh(c.epsilon));
  c.delta_n = 0.5 * std::log(0.5 * std::sinh(2.0 * c.epsilon));
  if (!std::isfinite(c.gamma_n) || !std::isfinite(c.delta_n))
    throw FrozenTrotterError(fmt::format("Trotter coupling not finite at epsilon = {}", c.epsilon));
  return c;
}

WorldlineConfig::WorldlineConfig(int sites, int layers, int value)
    : sites_(sites), layers_(layers),
      spins_(static_cast<std::size_t>(sites) * static_cast<std::size_t>(layers), static_cast<std::int8_t>(value)) {
  if (sites < 1 || layers < 1) throw std::invalid_argument("world-line lattice must be non-empty");
}

double layer_energy(const IsingModel& m, const WorldlineConfig& s, int layer) {
  double e = 0.0;
  for (const auto& b : m.bonds) e -= b.J * s.at(b.i, layer) * s.at(b.j, layer);
  return e;
}

double classical_action(const IsingModel& m, const TrotterCouplings& c, const WorldlineConfig& s) {
  const int n = s.layers();
  double space = 0.0;
  double time = 0.0;
  for (int l = 0; l < n; ++l) {
    space -= layer_energy(m, s, l);
    for (int i = 0; i < m.sites; ++i) time += s.at(i, l) * s.at(i, l + 1);
  }
  return m.beta / n * space + c.gamma_n * time;
}

namespace {

std::vector<std::vector<std::pair<int, double>>> neighbours(const IsingModel& m) {
  std::vector<std::vector<std::pair<int, double>>> nb(static_cast<std::size_t>(m.sites));
  for (const auto& b : m.bonds) {
    nb[static_cast<std::size_t>(b.i)].emplace_back(b.j, b.J);
    nb[static_cast<std::size_t>(b.j)].emplace_back(b.i, b.J);
  }
  return nb;
}

double local_field(const IsingModel& m, const TrotterCouplings& c, const WorldlineConfig& s,
                   const std::vector<std::pair<int, double>>& nb, int i, int layer) {
  double h = 0.0;
  for (const auto& [j, J] : nb) h += J * s.at(j, layer);
  h *= m.beta / s.layers();
  if (s.layers() > 1) h += c.gamma_n * (s.at(i, layer - 1) + s.at(i, layer + 1));
  return h;
}

}  // namespace

double flip_delta(const IsingModel& m, const TrotterCouplings& c, const WorldlineConfig& s, int i, int layer) {
  const auto nb = neighbours(m);
  return -2.0 * s.at(i, layer) * local_field(m, c, s, nb[static_cast<std::size_t>(i)], i, layer);
}

// ---------------------------------------------------------------------------

WorldlineSampler::WorldlineSampler(IsingModel model, int n, std::uint64_t seed)
    : model_(std::move(model)), couplings_(expprod::couplings(model_, n)), config_(model_.sites, n), neighbours_(neighbours(model_)), rng_(seed) {
  validate(model_);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < model_.sites; ++i) config_.set(i, l, (rng_() >> 63) ? 1 : -1);
  action_ = classical_action(model_, couplings_, config_);
}

void WorldlineSampler::set_gamma(double gamma) {
  model_.gamma = gamma;
  couplings_ = expprod::couplings(model_, couplings_.n);
  action_ = classical_action(model_, couplings_, config_);
}

void WorldlineSampler::sweep() {
  const auto& nb = neighbours_;
  const int n = config_.layers();
  for (int i = 0; i < model_.sites; ++i) {
    for (int l = 0; l < n; ++l) {
      const double d = -2.0 * config_.at(i, l) * local_field(model_, couplings_, config_, nb[static_cast<std::size_t>(i)], i, l);
      ++proposed_;
      if (d >= 0.0 || uniform01(rng_) < std::exp(d)) {
        config_.flip(i, l);
        action_ += d;
        ++accepted_;
      }
    }
  }
}

// ---------------------------------------------------------------------------

const ObservableStats& RunStats::get(const std::string& name) const {
  for (const auto& o : observables)
    if (o.name == name) return o;
  throw std::out_of_range(fmt::format("no observable '{}'", name));
}

namespace {

std::vector<std::string> observable_names(const IsingModel& m) {
  std::vector<std::string> names;
  for (const auto& b : m.bonds) names.push_back(fmt::format("zz[{},{}]", b.i, b.j));
  for (const char* s : {"magnetization", "trotter_corr", "energy_diag", "sigma_x"}) names.emplace_back(s);
  return names;
}

std::vector<double> measure(const IsingModel& m, const TrotterCouplings& c, const WorldlineConfig& s) {
  const int n = s.layers();
  std::vector<double> out;
  out.reserve(m.bonds.size() + 4);
  double energy = 0.0;
  for (const auto& b : m.bonds) {
    double zz = 0.0;
    for (int l = 0; l < n; ++l) zz += s.at(b.i, l) * s.at(b.j, l);
    zz /= n;
    energy -= b.J * zz;
    out.push_back(zz);
  }
  double mag = 0.0;
  double tc = 0.0;
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < m.sites; ++i) {
      mag += s.at(i, l);
      tc += s.at(i, l) * s.at(i, l + 1);
    }
  const double count = static_cast<double>(n) * m.sites;
  mag /= count;
  tc /= count;
  out.push_back(mag);
  out.push_back(tc);
  out.push_back(energy);
  const double two_eps = 2.0 * c.epsilon;
  out.push_back(1.0 / std::tanh(two_eps) - tc / std::sinh(two_eps));
  return out;
}

}  // namespace

RunStats metropolis_run(const IsingModel& m, int n, long sweeps, long therm, std::uint64_t seed, int bins,
                        bool keep_traces) {
  validate(m);
  if (therm < 0 || sweeps <= therm) throw std::invalid_argument("need sweeps > therm >= 0");
  if (bins < kMinBins) throw std::invalid_argument(fmt::format("at least {} bins required", kMinBins));
  const long measured = sweeps - therm;
  if (measured < bins) throw std::invalid_argument("fewer measured sweeps than bins");

  WorldlineSampler sampler(m, n, seed);
  for (long k = 0; k < therm; ++k) sampler.sweep();

  const auto names = observable_names(m);
  const std::size_t k_obs = names.size();
  const long per_bin = measured / bins;
  std::vector<std::vector<double>> bin_means(k_obs, std::vector<double>(static_cast<std::size_t>(bins), 0.0));
  std::vector<std::vector<double>> traces(keep_traces ? k_obs : 0);
  const long acc0 = sampler.accepted();
  const long prop0 = sampler.proposed();

  for (long k = 0; k < measured; ++k) {
    sampler.sweep();
    const auto v = measure(sampler.model(), sampler.couplings(), sampler.config());
    // Trailing sweeps that do not fill a whole bin are dropped from the binning.
    const long b = k / per_bin;
    for (std::size_t o = 0; o < k_obs; ++o) {
      if (b < bins) bin_means[o][static_cast<std::size_t>(b)] += v[o];
      if (keep_traces) traces[o].push_back(v[o]);
    }
  }

  RunStats r;
  r.n = n;
  r.sweeps = sweeps;
  r.therm = therm;
  r.seed = seed;
  r.bins = bins;
  r.acceptance = static_cast<double>(sampler.accepted() - acc0) / static_cast<double>(sampler.proposed() - prop0);
  for (std::size_t o = 0; o < k_obs; ++o) {
    auto& bm = bin_means[o];
    for (auto& x : bm) x /= static_cast<double>(per_bin);
    double mean = 0.0;
    for (double x : bm) mean += x;
    mean /= bins;
    double var = 0.0;
    for (double x : bm) var += (x - mean) * (x - mean);
    var /= (bins - 1);
    r.observables.push_back({names[o], mean, std::sqrt(var / bins)});
  }
  r.traces = std::move(traces);
  return r;
}

nlohmann::json to_json(const RunStats& r) {
  nlohmann::json obs = nlohmann::json::object();
  for (const auto& o : r.observables) obs[o.name] = {{"mean", o.mean}, {"stderr", o.stderr_}};
  return {{"n", r.n},     {"sweeps", r.sweeps},         {"therm", r.therm},     {"seed", r.seed},
          {"bins", r.bins}, {"acceptance", r.acceptance}, {"observables", obs}};
}

// ---------------------------------------------------------------------------

namespace {

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

ExactObservables exact_finite(const IsingModel& m, int n) {
  const int total = m.sites * n;
  if (total > kMaxEnumerationSpins)
    throw ResourceError(fmt::format("enumeration over {} spins exceeds the cap of {}", total, kMaxEnumerationSpins));
  const auto c = couplings(m, n);
  const std::uint64_t count = std::uint64_t{1} << total;
  const std::size_t nb = m.bonds.size();
  std::vector<std::vector<std::size_t>> bond_of(static_cast<std::size_t>(m.sites));
  for (std::size_t b = 0; b < nb; ++b) {
    bond_of[static_cast<std::size_t>(m.bonds[b].i)].push_back(b);
    bond_of[static_cast<std::size_t>(m.bonds[b].j)].push_back(b);
  }

  // Gray-code walk over all configurations: one spin flips per step and the
  // integer sums behind the action and the observables update exactly.
  WorldlineConfig s(m.sites, n);
  std::vector<long> zz(nb, n);
  long mag = static_cast<long>(total);
  long tc = static_cast<long>(total);
  const double scale = m.beta / n;
  double jsum = 0.0;
  for (const auto& b : m.bonds) jsum += std::abs(b.J);
  // Upper bound of the action, used as the log-sum-exp shift.
  const double amax = m.beta * jsum + c.gamma_n * total;

  std::vector<CompensatedSum> sums(nb + 2);
  CompensatedSum zacc;
  for (std::uint64_t k = 0;; ++k) {
    double space = 0.0;
    for (std::size_t b = 0; b < nb; ++b) space += m.bonds[b].J * static_cast<double>(zz[b]);
    const double w = std::exp(scale * space + c.gamma_n * static_cast<double>(tc) - amax);
    zacc.add(w);
    for (std::size_t b = 0; b < nb; ++b) sums[b].add(w * static_cast<double>(zz[b]));
    sums[nb].add(w * static_cast<double>(mag));
    sums[nb + 1].add(w * static_cast<double>(tc));
    if (k + 1 == count) break;
    const int bit = std::countr_zero(k + 1);
    const int i = bit % m.sites;
    const int l = bit / m.sites;
    const int v = s.at(i, l);
    for (std::size_t b : bond_of[static_cast<std::size_t>(i)]) {
      const int j = m.bonds[b].i == i ? m.bonds[b].j : m.bonds[b].i;
      zz[b] -= 2 * v * s.at(j, l);
    }
    mag -= 2 * v;
    if (n > 1) tc -= 2 * v * (s.at(i, l - 1) + s.at(i, l + 1));
    s.flip(i, l);
  }
  const double zsum = zacc.value();
  std::vector<double> acc(nb + 2);
  for (std::size_t k = 0; k < nb + 2; ++k) acc[k] = sums[k].value();
  for (std::size_t b = 0; b < nb; ++b) acc[b] /= n;
  acc[nb] /= total;
  acc[nb + 1] /= total;
  ExactObservables e;
  e.n = n;
  e.log_z = amax + std::log(zsum) + total * c.delta_n;
  for (std::size_t o = 0; o < nb; ++o) {
    e.zz.push_back(acc[o] / zsum);
    e.energy_diag -= m.bonds[o].J * e.zz.back();
  }
  e.magnetization = acc[nb] / zsum;
  e.trotter_corr = acc[nb + 1] / zsum;
  const double two_eps = 2.0 * c.epsilon;
  e.sigma_x = 1.0 / std::tanh(two_eps) - e.trotter_corr / std::sinh(two_eps);
  return e;
}

ExactObservables exact_infinite(const IsingModel& m) {
  if (m.sites > 30 || (std::int64_t{1} << m.sites) > kMaxDiagonalizationStates)
    throw ResourceError(fmt::format("diagonalization of {} sites exceeds {} states", m.sites, kMaxDiagonalizationStates));
  const Eigen::Index dim = Eigen::Index{1} << m.sites;
  auto spin = [](Eigen::Index state, int i) { return ((state >> i) & 1) ? -1.0 : 1.0; };
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    for (const auto& b : m.bonds) h(k, k) -= b.J * spin(k, b.i) * spin(k, b.j);
    for (int i = 0; i < m.sites; ++i) h(k ^ (Eigen::Index{1} << i), k) -= m.gamma;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::VectorXd& w = es.eigenvalues();
  const Eigen::MatrixXd& v = es.eigenvectors();
  const Eigen::VectorXd boltz = (-m.beta * (w.array() - w(0))).exp();
  const double zsum = boltz.sum();
  // rho diagonal in the computational basis and its sigma_x coherences.
  const Eigen::MatrixXd rho = v * boltz.asDiagonal() * v.transpose() / zsum;

  ExactObservables e;
  e.n = kInfiniteTrotter;
  e.log_z = -m.beta * w(0) + std::log(zsum);
  e.zz.assign(m.bonds.size(), 0.0);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double p = rho(k, k);
    for (std::size_t o = 0; o < m.bonds.size(); ++o) e.zz[o] += p * spin(k, m.bonds[o].i) * spin(k, m.bonds[o].j);
    for (int i = 0; i < m.sites; ++i) {
      e.magnetization += p * spin(k, i);
      e.sigma_x += rho(k ^ (Eigen::Index{1} << i), k);
    }
  }
  e.magnetization /= m.sites;
  e.sigma_x /= m.sites;
  for (std::size_t o = 0; o < m.bonds.size(); ++o) e.energy_diag -= m.bonds[o].J * e.zz[o];
  return e;
}

}  // namespace

ExactObservables exact_reference(const IsingModel& m, int n) {
  validate(m);
  if (n == kInfiniteTrotter) return exact_infinite(m);
  if (n < 0) throw std::invalid_argument("Trotter number must be positive");
  return exact_finite(m, n);
}

// ---------------------------------------------------------------------------

ExtrapolationReport extrapolate(const std::vector<int>& n_values, const std::vector<double>& values,
                                const std::vector<double>& errors) {
  if (n_values.size() != values.size() || (!errors.empty() && errors.size() != values.size()))
    throw std::invalid_argument("extrapolation inputs differ in length");
  std::set<int> distinct(n_values.begin(), n_values.end());
  if (distinct.size() != n_values.size()) throw std::invalid_argument("repeated Trotter number in extrapolation");
  for (int n : n_values)
    if (n < 1) throw std::invalid_argument("Trotter numbers must be positive");

  ExtrapolationReport r;
  r.n_values = n_values;
  r.values = values;
  r.errors = errors;
  const auto k = static_cast<Eigen::Index>(n_values.size());
  if (k < 3) {
    r.diagnostics = "fit needs at least three Trotter numbers";
    return r;
  }
  Eigen::MatrixXd x(k, 3);
  Eigen::VectorXd y(k);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double inv = 1.0 / n_values[static_cast<std::size_t>(i)];
    x.row(i) << 1.0, inv, inv * inv;
    y(i) = values[static_cast<std::size_t>(i)];
    if (!errors.empty()) {
      const double e = errors[static_cast<std::size_t>(i)];
      if (!(e > 0.0)) {
        r.diagnostics = "non-positive error bar";
        return r;
      }
      w(i) = 1.0 / e;
    }
  }
  const Eigen::MatrixXd xw = w.asDiagonal() * x;
  const Eigen::VectorXd yw = w.asDiagonal() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  if (qr.rank() < 3) {
    r.diagnostics = "design matrix is rank deficient";
    return r;
  }
  const Eigen::VectorXd c = qr.solve(yw);
  r.c0 = c(0);
  r.c1 = c(1);
  r.c2 = c(2);
  const Eigen::VectorXd res = y - x * c;
  r.residuals.assign(res.data(), res.data() + k);
  const Eigen::MatrixXd cov = (xw.transpose() * xw).inverse();
  // Unit weights: scale by the residual variance, which is zero for an exact fit.
  double scale = 1.0;
  if (errors.empty()) scale = k > 3 ? res.squaredNorm() / static_cast<double>(k - 3) : 0.0;
  r.c0_stderr = std::sqrt(std::max(0.0, cov(0, 0) * scale));
  const double nmin = *std::min_element(n_values.begin(), n_values.end());
  r.dominant_power = std::abs(r.c1) / nmin >= std::abs(r.c2) / (nmin * nmin) ? 1 : 2;
  r.ok = std::isfinite(r.c0);
  if (!r.ok) r.diagnostics = "fit produced a non-finite intercept";
  return r;
}

ExtrapolationReport trotter_extrapolate(const IsingModel& m, const std::vector<int>& n_values, long sweeps,
                                        long therm, std::uint64_t seed, const std::string& observable) {
  std::set<int> distinct(n_values.begin(), n_values.end());
  if (distinct.size() != n_values.size()) throw std::invalid_argument("repeated Trotter number in extrapolation");
  std::vector<double> values;
  std::vector<double> errors;
  std::seed_seq seq{seed};
  std::vector<std::uint64_t> seeds(n_values.size());
  {
    std::vector<std::uint32_t> raw(2 * n_values.size());
    seq.generate(raw.begin(), raw.end());
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = (std::uint64_t{raw[2 * i]} << 32) | raw[2 * i + 1];
  }
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    const auto r = metropolis_run(m, n_values[i], sweeps, therm, seeds[i]);
    const auto& o = r.get(observable);
    values.push_back(o.mean);
    errors.push_back(o.stderr_);
  }
  return extrapolate(n_values, values, errors);
}

// ---------------------------------------------------------------------------

AnnealResult anneal(const IsingModel& m, int n, std::vector<double> schedule, long sweeps_per_stage,
                    std::uint64_t seed) {
  if (schedule.empty()) throw std::invalid_argument("empty annealing schedule");
  if (sweeps_per_stage < 1) throw std::invalid_argument("need at least one sweep per stage");
  AnnealResult result;
  for (auto& g : schedule) {
    if (!(g >= kGammaFloor)) {
      result.warnings.push_back(fmt::format("transverse field {} clamped to {}", g, kGammaFloor));
      g = kGammaFloor;
    }
  }
  for (std::size_t k = 1; k < schedule.size(); ++k)
    if (schedule[k] > schedule[k - 1]) throw std::invalid_argument("annealing schedule must be decreasing");
  IsingModel start = m;
  start.gamma = schedule.front();
  WorldlineSampler sampler(start, n, seed);
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (k > 0) sampler.set_gamma(schedule[k]);
    for (long s = 0; s < sweeps_per_stage; ++s) sampler.sweep();
  }
  const auto& cfg = sampler.config();
  result.energy = std::numeric_limits<double>::infinity();
  for (int l = 0; l < n; ++l) {
    const double e = layer_energy(m, cfg, l);
    if (e < result.energy) {
      result.energy = e;
      result.best_layer = l;
    }
  }
  for (int i = 0; i < m.sites; ++i) result.configuration.push_back(cfg.at(i, result.best_layer));
  return result;
}

std::vector<double> geometric_schedule(double start, double end, int stages) {
  if (stages < 1 || !(start > 0.0) || !(end > 0.0)) throw std::invalid_argument("bad annealing schedule");
  std::vector<double> g;
  for (int k = 0; k < stages; ++k)
    g.push_back(stages == 1 ? end : start * std::pow(end / start, static_cast<double>(k) / (stages - 1)));
  return g;
}

}  // namespace expprod
