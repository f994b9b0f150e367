#include "expprod/propagate.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace expprod {

namespace {

const Complex kI(0.0, 1.0);

CMatrix bracket_matrix(const Bracket& b, const std::vector<const HermitianPart*>& parts) {
  if (b.is_leaf()) {
    const auto idx = static_cast<std::size_t>(b.leaf);
    if (idx >= parts.size()) throw std::invalid_argument("commutator leaf has no matching part");
    return -kI * parts[idx]->matrix();
  }
  CMatrix l = bracket_matrix(b.children[0], parts);
  CMatrix r = bracket_matrix(b.children[1], parts);
  return l * r - r * l;
}

void check_two_slot(const Scheme& s) {
  if (s.slots.size() != 2) throw std::invalid_argument("scheme must have exactly the slots A and B");
}

double energy(const HermitianPart& h, const CVector& psi) { return psi.dot(h.matrix() * psi).real(); }

}  // namespace

CMatrix pauli_x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMatrix pauli_y() {
  CMatrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}

CMatrix pauli_z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

HermitianPart::HermitianPart(const CMatrix& h, double tol) {
  if (h.rows() != h.cols()) throw std::invalid_argument("Hermitian part must be square");
  if ((h - h.adjoint()).norm() > tol) throw std::domain_error("matrix is not Hermitian");
  h_ = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(h_);
  w_ = eig.eigenvalues();
  v_ = eig.eigenvectors();
}

CMatrix HermitianPart::propagator(double theta) const {
  Eigen::VectorXcd phase = (-kI * theta * w_.cast<Complex>()).array().exp();
  return v_ * phase.asDiagonal() * v_.adjoint();
}

void HermitianPart::apply(double theta, CVector& psi) const {
  if (psi.size() != dim()) throw std::invalid_argument("state dimension does not match the Hamiltonian");
  CVector c = v_.adjoint() * psi;
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(-kI * (theta * w_[k]));
  psi = v_ * c;
}

HermitianPart commutator_part(const Bracket& b, const std::vector<const HermitianPart*>& parts) {
  CMatrix m = bracket_matrix(b, parts);
  CMatrix k = kI * m;
  return HermitianPart(k, 1e-9 * std::max(1.0, k.norm()));
}

UnitaryStepper::UnitaryStepper(Scheme scheme, HermitianPart a, HermitianPart b) : scheme_(std::move(scheme)) {
  check_two_slot(scheme_);
  if (a.dim() != b.dim()) throw std::invalid_argument("parts A and B differ in dimension");
  parts_ = {std::move(a), std::move(b)};
  std::vector<const HermitianPart*> ptrs = {&parts_[0], &parts_[1]};
  for (const auto& st : scheme_.stages)
    commutators_.push_back(st.is_commutator() ? std::optional<HermitianPart>(commutator_part(st.commutator->bracket, ptrs))
                                              : std::nullopt);
}

void UnitaryStepper::step(double dt, CVector& psi) const {
  for (std::size_t i = scheme_.stages.size(); i-- > 0;) {
    const Stage& st = scheme_.stages[i];
    if (st.is_commutator())
      commutators_[i]->apply(st.coeff.value * std::pow(dt, st.commutator->x_power), psi);
    else
      parts_[static_cast<std::size_t>(st.slot)].apply(st.coeff.value * dt, psi);
  }
}

CVector unitary_step(const Scheme& scheme, const HermitianPart& a, const HermitianPart& b, double dt,
                     const CVector& psi) {
  UnitaryStepper stepper(scheme, a, b);
  CVector out = psi;
  stepper.step(dt, out);
  return out;
}

CVector perturbative_step(const HermitianPart& a, const HermitianPart& b, double dt, const CVector& psi) {
  if (a.dim() != b.dim() || psi.size() != a.dim()) throw std::invalid_argument("dimension mismatch");
  return psi - kI * dt * ((a.matrix() + b.matrix()) * psi);
}

CVector exact_evolution(const HermitianPart& h, double t, const CVector& psi) {
  CVector out = psi;
  h.apply(t, out);
  return out;
}

SpinSystem spin_system(double gamma) {
  CVector psi0(2);
  psi0 << 1, 0;
  return {HermitianPart(pauli_z()), HermitianPart(gamma * pauli_x()), HermitianPart(pauli_z() + gamma * pauli_x()),
          psi0, std::numbers::pi / std::sqrt(1.0 + gamma * gamma)};
}

std::vector<PrecessionSample> run_precession(const std::optional<Scheme>& scheme, double gamma, double dt,
                                             long steps, long sample_every) {
  if (sample_every < 1) throw std::invalid_argument("sample_every must be >= 1");
  SpinSystem sys = spin_system(gamma);
  std::optional<UnitaryStepper> stepper;
  if (scheme) stepper.emplace(*scheme, sys.a, sys.b);
  CVector psi = sys.psi0;
  std::vector<PrecessionSample> out;
  out.reserve(static_cast<std::size_t>(steps / sample_every + 1));
  out.push_back({0.0, energy(sys.h, psi), psi.norm()});
  for (long n = 1; n <= steps; ++n) {
    if (stepper)
      stepper->step(dt, psi);
    else
      psi = perturbative_step(sys.a, sys.b, dt, psi);
    if (n % sample_every == 0) out.push_back({static_cast<double>(n) * dt, energy(sys.h, psi), psi.norm()});
  }
  return out;
}

double dominant_period(const std::vector<double>& t, const std::vector<double>& y, double min_period,
                       double max_period) {
  if (t.size() != y.size() || t.size() < 3) throw std::invalid_argument("dominant_period: need matched samples");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  auto power = [&](double omega) {
    Complex s(0.0, 0.0);
    for (std::size_t k = 0; k < t.size(); ++k) s += (y[k] - mean) * std::exp(Complex(0.0, -omega * t[k]));
    return std::norm(s);
  };
  const double w_lo = 2.0 * std::numbers::pi / max_period;
  const double w_hi = 2.0 * std::numbers::pi / min_period;
  const int grid = 2000;
  const double dw = (w_hi - w_lo) / grid;
  double best_w = w_lo;
  double best_p = -1.0;
  for (int i = 0; i <= grid; ++i) {
    double w = w_lo + dw * i;
    double p = power(w);
    if (p > best_p) {
      best_p = p;
      best_w = w;
    }
  }
  // golden-section refinement around the best grid point
  double a = std::max(w_lo, best_w - dw);
  double b = std::min(w_hi, best_w + dw);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double pc = power(c);
  double pd = power(d);
  for (int it = 0; it < 60; ++it) {
    if (pc > pd) {
      b = d;
      d = c;
      pd = pc;
      c = b - g * (b - a);
      pc = power(c);
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + g * (b - a);
      pd = power(d);
    }
  }
  return 2.0 * std::numbers::pi / (0.5 * (a + b));
}

SeparableHamiltonian harmonic_oscillator(int dim) {
  SeparableHamiltonian h;
  h.dim = dim;
  h.kinetic = [](const Eigen::VectorXd& p) { return 0.5 * p.squaredNorm(); };
  h.potential = [](const Eigen::VectorXd& q) { return 0.5 * q.squaredNorm(); };
  h.grad_kinetic = [](const Eigen::VectorXd& p) { return p; };
  h.grad_potential = [](const Eigen::VectorXd& q) { return q; };
  return h;
}

SeparableHamiltonian umeno_system() {
  SeparableHamiltonian h;
  h.dim = 2;
  h.kinetic = [](const Eigen::VectorXd& p) { return 0.5 * p.squaredNorm(); };
  h.potential = [](const Eigen::VectorXd& q) { return 0.5 * q[0] * q[0] * q[1] * q[1]; };
  h.grad_kinetic = [](const Eigen::VectorXd& p) { return p; };
  h.grad_potential = [](const Eigen::VectorXd& q) {
    Eigen::VectorXd g(2);
    g << q[0] * q[1] * q[1], q[0] * q[0] * q[1];
    return g;
  };
  return h;
}

void drift(const SeparableHamiltonian& h, double dt, PhasePoint& x) { x.q += dt * h.grad_kinetic(x.p); }

void kick(const SeparableHamiltonian& h, double dt, PhasePoint& x) { x.p -= dt * h.grad_potential(x.q); }

PhasePoint symplectic_step(const Scheme& scheme, const SeparableHamiltonian& h, double dt, const PhasePoint& x,
                           SlotMapping mapping) {
  check_two_slot(scheme);
  PhasePoint out = x;
  const int drift_slot = mapping == SlotMapping::KineticPotential ? 0 : 1;
  for (auto it = scheme.stages.rbegin(); it != scheme.stages.rend(); ++it) {
    if (it->is_commutator()) throw std::invalid_argument("symplectic_step does not support commutator stages");
    if (it->slot == drift_slot)
      drift(h, it->coeff.value * dt, out);
    else
      kick(h, it->coeff.value * dt, out);
  }
  return out;
}

PhasePoint euler_step(const SeparableHamiltonian& h, double dt, const PhasePoint& x) {
  PhasePoint out;
  out.p = x.p - dt * h.grad_potential(x.q);
  out.q = x.q + dt * h.grad_kinetic(x.p);
  return out;
}

std::vector<UmenoSample> run_umeno(const std::optional<Scheme>& scheme, double dt, long steps, long sample_every,
                                   SlotMapping mapping) {
  if (sample_every < 1) throw std::invalid_argument("sample_every must be >= 1");
  const SeparableHamiltonian h = umeno_system();
  PhasePoint x{Eigen::VectorXd::Zero(2), Eigen::VectorXd(2)};
  x.q << 2.0, 1.0;
  std::vector<UmenoSample> out;
  out.reserve(static_cast<std::size_t>(steps / sample_every + 1));
  out.push_back({0.0, h.energy(x), x.q[0], x.q[1]});
  for (long n = 1; n <= steps; ++n) {
    x = scheme ? symplectic_step(*scheme, h, dt, x, mapping) : euler_step(h, dt, x);
    if (n % sample_every == 0) out.push_back({static_cast<double>(n) * dt, h.energy(x), x.q[0], x.q[1]});
  }
  return out;
}

Eigen::MatrixXd phase_jacobian(const std::function<PhasePoint(const PhasePoint&)>& map, const PhasePoint& x,
                               double h) {
  const auto d = x.p.size();
  auto flat = [d](const PhasePoint& y) {
    Eigen::VectorXd v(2 * d);
    v << y.p, y.q;
    return v;
  };
  Eigen::MatrixXd jac(2 * d, 2 * d);
  for (Eigen::Index j = 0; j < 2 * d; ++j) {
    PhasePoint plus = x;
    PhasePoint minus = x;
    if (j < d) {
      plus.p[j] += h;
      minus.p[j] -= h;
    } else {
      plus.q[j - d] += h;
      minus.q[j - d] -= h;
    }
    jac.col(j) = (flat(map(plus)) - flat(map(minus))) / (2.0 * h);
  }
  return jac;
}

CVector timeordered_step(const Scheme& scheme, const TimeDependentParts& parts, double t, double dt,
                         const CVector& psi) {
  const int a = scheme.slot_index("A");
  const int b = scheme.slot_index("B");
  if (a < 0 || b < 0 || scheme.slot_index("T") < 0 || scheme.slots.size() != 3)
    throw std::invalid_argument("time-ordered scheme must have the slots A, B and T");
  CVector out = psi;
  for (const auto& st : evaluation_times(scheme, t, dt)) {
    if (st.slot != a && st.slot != b) throw std::invalid_argument("time-ordered scheme has a commutator stage");
    HermitianPart part(st.slot == a ? parts.a(st.time) : parts.b(st.time));
    part.apply(st.coeff.value * dt, out);
  }
  return out;
}

CVector evolve_timeordered(const Scheme& scheme, const TimeDependentParts& parts, const CVector& psi0, double total,
                           long steps) {
  const double dt = total / static_cast<double>(steps);
  CVector psi = psi0;
  for (long n = 0; n < steps; ++n) psi = timeordered_step(scheme, parts, static_cast<double>(n) * dt, dt, psi);
  return psi;
}

double composition_coefficient(double x, double h) {
  if (x == 0.0) return 1.0;
  const Eigen::Matrix2d sx = (Eigen::Matrix2d() << 0, 1, 1, 0).finished();
  const Eigen::Matrix2d sz = (Eigen::Matrix2d() << 1, 0, 0, -1).finished();
  const Eigen::Matrix2d middle = (x * sz).exp();
  auto phi = [&](double gamma) {
    const Eigen::Matrix2d side = (0.5 * x * gamma * sx).exp();
    const Eigen::Matrix2d m = side * middle * side;
    // product of real symmetric factors in this palindromic order is symmetric positive definite
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(0.5 * (m + m.transpose()));
    if (eig.eigenvalues().minCoeff() <= 0.0)
      throw std::domain_error("matrix logarithm off the principal branch; reduce x");
    Eigen::Vector2d logs = eig.eigenvalues().array().log();
    return Eigen::Matrix2d(eig.eigenvectors() * logs.asDiagonal() * eig.eigenvectors().transpose());
  };
  const Eigen::Matrix2d d = (phi(h) - phi(-h)) / (2.0 * h);
  return 0.5 * (d(0, 1) + d(1, 0)) / x;
}

std::vector<CompositionRow> perturbational_composition(const std::vector<double>& xs, double h) {
  std::vector<CompositionRow> out;
  for (double x : xs) {
    double analytic = x == 0.0 ? 1.0 : x / std::tanh(x);
    out.push_back({x, analytic, composition_coefficient(x, h)});
  }
  return out;
}

double roundoff_floor(long steps, std::size_t stages, double floor) {
  return std::max(floor, 10.0 * static_cast<double>(steps) * static_cast<double>(stages) * 2.0 *
                             std::numeric_limits<double>::epsilon());
}

ConvergenceReport fit_convergence(const std::vector<double>& dts, const std::vector<double>& errors,
                                  const std::vector<double>& floors) {
  if (dts.size() != errors.size() || dts.size() != floors.size())
    throw std::invalid_argument("fit_convergence: size mismatch");
  ConvergenceReport rep;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < dts.size(); ++i) {
    bool use = std::isfinite(errors[i]) && errors[i] > floors[i] && dts[i] > 0.0;
    rep.points.push_back({dts[i], errors[i], floors[i], use});
    if (!use) continue;
    double lx = std::log(dts[i]);
    double ly = std::log(errors[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++rep.used;
  }
  if (rep.used >= 2) {
    const double n = rep.used;
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.intercept = (sy - rep.slope * sx) / n;
  }
  return rep;
}

std::vector<long> geometric_step_counts(long n_min, long n_max, int per_octave) {
  if (n_min < 1 || n_max < n_min || per_octave < 1) throw std::invalid_argument("invalid step-count range");
  std::vector<long> out;
  for (int j = 0;; ++j) {
    const long n = std::lround(std::pow(2.0, static_cast<double>(j) / per_octave));
    if (n > n_max) break;
    if (n >= n_min && (out.empty() || out.back() != n)) out.push_back(n);
  }
  return out;
}

ConvergenceReport converge_unitary(const Scheme& scheme, const HermitianPart& a, const HermitianPart& b,
                                   const CVector& psi0, double total, const std::vector<long>& step_counts,
                                   double floor) {
  const UnitaryStepper stepper(scheme, a, b);
  const HermitianPart h(a.matrix() + b.matrix());
  const CVector exact = exact_evolution(h, total, psi0);
  std::vector<double> dts, errors, floors;
  for (long steps : step_counts) {
    const double dt = total / static_cast<double>(steps);
    CVector psi = psi0;
    for (long n = 0; n < steps; ++n) stepper.step(dt, psi);
    dts.push_back(dt);
    errors.push_back((psi - exact).norm());
    floors.push_back(roundoff_floor(steps, scheme.stages.size(), floor));
  }
  return fit_convergence(dts, errors, floors);
}

ConvergenceReport converge_timeordered(const Scheme& scheme, const TimeDependentParts& parts, const CVector& psi0,
                                       double total, const std::vector<long>& step_counts, const CVector& reference,
                                       double floor) {
  std::vector<double> dts, errors, floors;
  for (long steps : step_counts) {
    dts.push_back(total / static_cast<double>(steps));
    errors.push_back((evolve_timeordered(scheme, parts, psi0, total, steps) - reference).norm());
    floors.push_back(roundoff_floor(steps, scheme.stages.size(), floor));
  }
  return fit_convergence(dts, errors, floors);
}

CVector runge_kutta_reference(const TimeDependentParts& parts, const CVector& psi0, double total, long steps) {
  using LComplex = std::complex<long double>;
  using LMatrix = Eigen::Matrix<LComplex, Eigen::Dynamic, Eigen::Dynamic>;
  using LVector = Eigen::Matrix<LComplex, Eigen::Dynamic, 1>;
  const LComplex mi(0.0L, -1.0L);
  auto generator = [&](long double t) {
    const auto td = static_cast<double>(t);
    return LMatrix(mi * (parts.a(td) + parts.b(td)).cast<LComplex>());
  };
  const long double h = static_cast<long double>(total) / static_cast<long double>(steps);
  LVector y = psi0.cast<LComplex>();
  for (long n = 0; n < steps; ++n) {
    const long double t = h * static_cast<long double>(n);
    const LMatrix g0 = generator(t);
    const LMatrix gm = generator(t + 0.5L * h);
    const LMatrix g1 = generator(t + h);
    LVector k1 = g0 * y;
    LVector k2 = gm * (y + (0.5L * h) * k1);
    LVector k3 = gm * (y + (0.5L * h) * k2);
    LVector k4 = g1 * (y + h * k3);
    y += (h / 6.0L) * (k1 + 2.0L * k2 + 2.0L * k3 + k4);
  }
  CVector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = Complex(static_cast<double>(y[i].real()), static_cast<double>(y[i].imag()));
  return out;
}

ConvergenceReport converge_spin(const Scheme& scheme, double gamma, long n_max) {
  const SpinSystem sys = spin_system(gamma);
  return converge_unitary(scheme, sys.a, sys.b, sys.psi0, 0.75 * sys.period, geometric_step_counts(2, n_max));
}

TimeDependentParts driven_two_level() {
  return {[](double) { return pauli_z(); }, [](double t) { return CMatrix(std::cos(t) * pauli_x()); }};
}

ConvergenceReport converge_driven(const Scheme& scheme, long n_max) {
  const TimeDependentParts parts = driven_two_level();
  CVector psi0(2);
  psi0 << 1.0, 0.0;
  const double total = 0.75 * spin_system(0.75).period;
  const CVector reference = runge_kutta_reference(parts, psi0, total, 1L << 17);
  return converge_timeordered(scheme, parts, psi0, total, geometric_step_counts(2, n_max), reference);
}

CMatrix random_hermitian(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  CMatrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = Complex(normal(rng), normal(rng));
  return 0.5 * (m + m.adjoint());
}

}  // namespace expprod
