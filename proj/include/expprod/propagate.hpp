#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "expprod/schemes.hpp"

namespace expprod {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

CMatrix pauli_x();
CMatrix pauli_y();
CMatrix pauli_z();

// ---------------------------------------------------------------------------
// Unitary stepping
// ---------------------------------------------------------------------------

/// Hermitian matrix with a cached eigendecomposition H = V diag(w) V^dagger.
class HermitianPart {
 public:
  /// Throws std::domain_error when ||H - H^dagger|| > tol.
  explicit HermitianPart(const CMatrix& h, double tol = 1e-12);

  Eigen::Index dim() const { return h_.rows(); }
  const CMatrix& matrix() const { return h_; }
  const Eigen::VectorXd& eigenvalues() const { return w_; }
  const CMatrix& eigenvectors() const { return v_; }

  /// exp(-i theta H)
  CMatrix propagator(double theta) const;
  /// psi <- exp(-i theta H) psi
  void apply(double theta, CVector& psi) const;

 private:
  CMatrix h_;
  Eigen::VectorXd w_;
  CMatrix v_;
};

/// Hermitian K such that the bracket of the anti-Hermitian generators
/// -i H_j (leaves of `b` index `parts`) equals -i K.
HermitianPart commutator_part(const Bracket& b, const std::vector<const HermitianPart*>& parts);

/// Applies a two-slot scheme to psi with slot A -> parts a, B -> b. Each stage
/// exp(-i c dt H) uses the cached eigendecomposition; commutator stages
/// exp(c dt^k [..]) use the Hermitian part of the matrix bracket.
class UnitaryStepper {
 public:
  UnitaryStepper(Scheme scheme, HermitianPart a, HermitianPart b);

  void step(double dt, CVector& psi) const;
  const Scheme& scheme() const { return scheme_; }

 private:
  Scheme scheme_;
  std::vector<HermitianPart> parts_;
  std::vector<std::optional<HermitianPart>> commutators_;  ///< per stage
};

CVector unitary_step(const Scheme& scheme, const HermitianPart& a, const HermitianPart& b, double dt,
                     const CVector& psi);

/// psi <- (I - i dt (A + B)) psi
CVector perturbative_step(const HermitianPart& a, const HermitianPart& b, double dt, const CVector& psi);

/// exp(-i t H) psi
CVector exact_evolution(const HermitianPart& h, double t, const CVector& psi);

// ---------------------------------------------------------------------------
// Spin precession
// ---------------------------------------------------------------------------

/// H = sigma_z + gamma sigma_x split as A = sigma_z, B = gamma sigma_x,
/// started from the up spin.
struct SpinSystem {
  HermitianPart a;
  HermitianPart b;
  HermitianPart h;
  CVector psi0;
  double period;  ///< pi / sqrt(1 + gamma^2)
};

SpinSystem spin_system(double gamma);

struct PrecessionSample {
  double t;
  double energy;  ///< psi^dagger H psi, not normalized
  double norm;
};

/// Steps the spin system with `scheme`, or with the perturbative baseline
/// when `scheme` is empty. Samples every `sample_every` steps, including t = 0.
std::vector<PrecessionSample> run_precession(const std::optional<Scheme>& scheme, double gamma, double dt,
                                             long steps, long sample_every);

/// Period of the strongest Fourier component of y(t) after removing the
/// mean, searched over periods in [min_period, max_period].
double dominant_period(const std::vector<double>& t, const std::vector<double>& y, double min_period,
                       double max_period);

// ---------------------------------------------------------------------------
// Separable classical dynamics
// ---------------------------------------------------------------------------

struct PhasePoint {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

/// H(p, q) = K(p) + V(q) with user-supplied gradients.
struct SeparableHamiltonian {
  int dim = 1;
  std::function<double(const Eigen::VectorXd&)> kinetic;
  std::function<double(const Eigen::VectorXd&)> potential;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_kinetic;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_potential;

  double energy(const PhasePoint& x) const { return kinetic(x.p) + potential(x.q); }
};

/// K = |p|^2 / 2, V = |q|^2 / 2
SeparableHamiltonian harmonic_oscillator(int dim = 1);
/// K = (p1^2 + p2^2) / 2, V = q1^2 q2^2 / 2
SeparableHamiltonian umeno_system();

/// q <- q + dt grad K(p)
void drift(const SeparableHamiltonian& h, double dt, PhasePoint& x);
/// p <- p - dt grad V(q)
void kick(const SeparableHamiltonian& h, double dt, PhasePoint& x);

/// Which physical flow each scheme slot drives.
enum class SlotMapping {
  KineticPotential,  ///< A = drift, B = kick
  PotentialKinetic,  ///< A = kick, B = drift
};

PhasePoint symplectic_step(const Scheme& scheme, const SeparableHamiltonian& h, double dt, const PhasePoint& x,
                           SlotMapping mapping = SlotMapping::KineticPotential);

/// Simultaneous first-order update (p, q) <- (p - dt grad V(q), q + dt grad K(p)).
PhasePoint euler_step(const SeparableHamiltonian& h, double dt, const PhasePoint& x);

struct UmenoSample {
  double t;
  double energy;
  double q1;
  double q2;
};

/// Starts at p = 0, q = (2, 1); Euler baseline when `scheme` is empty.
std::vector<UmenoSample> run_umeno(const std::optional<Scheme>& scheme, double dt, long steps, long sample_every,
                                   SlotMapping mapping = SlotMapping::KineticPotential);

/// Central-difference Jacobian of a phase-space map, variables ordered (p, q).
Eigen::MatrixXd phase_jacobian(const std::function<PhasePoint(const PhasePoint&)>& map, const PhasePoint& x,
                               double h = 1e-6);

// ---------------------------------------------------------------------------
// Time-dependent Hamiltonians
// ---------------------------------------------------------------------------

struct TimeDependentParts {
  std::function<CMatrix(double)> a;
  std::function<CMatrix(double)> b;
};

/// One step of a three-slot (A, B, T) scheme: every A/B stage is evaluated at
/// its shifted time and applied right-to-left.
CVector timeordered_step(const Scheme& scheme, const TimeDependentParts& parts, double t, double dt,
                         const CVector& psi);

// ---------------------------------------------------------------------------
// Perturbational composition
// ---------------------------------------------------------------------------

struct CompositionRow {
  double x;
  double analytic;  ///< x coth x
  double numeric;   ///< extracted from the matrix logarithm
};

/// sigma_x coefficient of d/dgamma log(e^{x gamma sigma_x / 2} e^{x sigma_z} e^{x gamma sigma_x / 2})
/// at gamma = 0, divided by x, by central differences with step h.
double composition_coefficient(double x, double h = 1e-6);

std::vector<CompositionRow> perturbational_composition(const std::vector<double>& xs, double h = 1e-6);

// ---------------------------------------------------------------------------
// Convergence sweeps
// ---------------------------------------------------------------------------

struct ConvergencePoint {
  double dt;
  double error;
  double floor;  ///< errors at or below this are roundoff-dominated
  bool used;
};

struct ConvergenceReport {
  std::vector<ConvergencePoint> points;
  double slope = 0.0;
  double intercept = 0.0;
  int used = 0;
};

constexpr double kErrorFloor = 1e-13;

/// Accumulated roundoff estimate for `steps` steps of `stages` exponentials.
double roundoff_floor(long steps, std::size_t stages, double floor = kErrorFloor);

/// Least-squares slope of log(error) against log(dt) over the points whose
/// error lies above their floor.
ConvergenceReport fit_convergence(const std::vector<double>& dts, const std::vector<double>& errors,
                                  const std::vector<double>& floors);

/// Distinct step counts round(2^(j / per_octave)) within [n_min, n_max].
std::vector<long> geometric_step_counts(long n_min, long n_max, int per_octave = 2);

/// Final-state error after `total` time units against exact evolution for
/// each step count.
ConvergenceReport converge_unitary(const Scheme& scheme, const HermitianPart& a, const HermitianPart& b,
                                   const CVector& psi0, double total, const std::vector<long>& step_counts,
                                   double floor = kErrorFloor);

/// Same for a three-slot scheme on time-dependent parts, against a reference
/// final state supplied by the caller.
ConvergenceReport converge_timeordered(const Scheme& scheme, const TimeDependentParts& parts, const CVector& psi0,
                                       double total, const std::vector<long>& step_counts, const CVector& reference,
                                       double floor = kErrorFloor);

/// Evolves psi over [0, total] in `steps` equal steps of a three-slot scheme.
CVector evolve_timeordered(const Scheme& scheme, const TimeDependentParts& parts, const CVector& psi0, double total,
                           long steps);

/// Spin-system sweep: total time 3/4 of a precession period (a full period
/// averages part of the error away), step counts from 2 to n_max.
ConvergenceReport converge_spin(const Scheme& scheme, double gamma, long n_max = 8192);

/// A = sigma_z, B(t) = cos(t) sigma_x.
TimeDependentParts driven_two_level();

/// Driven two-level sweep over the same time span as the spin sweep at
/// gamma = 3/4, against a long-double Runge-Kutta reference.
ConvergenceReport converge_driven(const Scheme& scheme, long n_max = 8192);

/// Hermitian matrix (M + M^dagger) / 2 with standard normal complex entries.
CMatrix random_hermitian(int dim, std::mt19937_64& rng);

/// Classical fourth-order Runge-Kutta for i psi' = H(t) psi in long double,
/// H(t) = A(t) + B(t). Used as a reference solution.
CVector runge_kutta_reference(const TimeDependentParts& parts, const CVector& psi0, double total, long steps);

}  // namespace expprod
