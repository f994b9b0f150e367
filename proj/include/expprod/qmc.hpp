#pragma once

#include <json.hpp>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "expprod/errors.hpp"

namespace expprod {

struct Bond {
  int i = 0;
  int j = 0;
  double J = 0.0;
};

/// H = -sum J_ij sz_i sz_j - gamma sum sx_i at inverse temperature beta.
struct IsingModel {
  int sites = 0;
  std::vector<Bond> bonds;
  double gamma = 0.0;
  double beta = 1.0;
};

/// Throws std::invalid_argument on out-of-range or duplicate bonds,
/// negative gamma or non-positive beta.
void validate(const IsingModel& m);

IsingModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IsingModel& m);

/// Open chain 0-1-...-(N-1) with uniform coupling.
IsingModel chain(int sites, double J, double gamma, double beta);

/// Thrown when the transverse field vanishes and the Trotter layers decouple
/// into frozen copies (the inter-layer coupling diverges).
class FrozenTrotterError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct TrotterCouplings {
  int n = 1;
  double epsilon = 0.0;  ///< beta gamma / n
  double gamma_n = 0.0;  ///< -1/2 ln tanh(epsilon)
  double delta_n = 0.0;  ///< 1/2 ln(sinh(2 epsilon) / 2)
};

TrotterCouplings couplings(const IsingModel& m, int n);

/// Spins s[i][m] in {-1, +1}, periodic in the layer index m.
class WorldlineConfig {
 public:
  WorldlineConfig(int sites, int layers, int value = 1);

  int sites() const { return sites_; }
  int layers() const { return layers_; }
  int at(int i, int m) const { return spins_[index(i, m)]; }
  void set(int i, int m, int v) { spins_[index(i, m)] = static_cast<std::int8_t>(v); }
  void flip(int i, int m) { spins_[index(i, m)] = static_cast<std::int8_t>(-spins_[index(i, m)]); }

 private:
  std::size_t index(int i, int m) const {
    const int mm = ((m % layers_) + layers_) % layers_;
    return static_cast<std::size_t>(mm) * static_cast<std::size_t>(sites_) + static_cast<std::size_t>(i);
  }
  int sites_;
  int layers_;
  std::vector<std::int8_t> spins_;
};

/// (beta/n) sum_m sum_bonds J s_i s_j + gamma_n sum_m sum_i s_i^(m) s_i^(m+1),
/// without the delta_n constant. For n = 1 the Trotter term is the constant
/// gamma_n N.
double classical_action(const IsingModel& m, const TrotterCouplings& c, const WorldlineConfig& s);

/// Change of the action when s_i^(m) is flipped.
double flip_delta(const IsingModel& m, const TrotterCouplings& c, const WorldlineConfig& s, int i, int layer);

/// Diagonal energy -sum J s_i s_j of one layer.
double layer_energy(const IsingModel& m, const WorldlineConfig& s, int layer);

/// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Single-spin-flip Metropolis chain with a running action.
class WorldlineSampler {
 public:
  WorldlineSampler(IsingModel model, int n, std::uint64_t seed);

  /// One pass over all N n spins in site-major order.
  void sweep();
  void set_gamma(double gamma);

  const IsingModel& model() const { return model_; }
  const TrotterCouplings& couplings() const { return couplings_; }
  const WorldlineConfig& config() const { return config_; }
  double action() const { return action_; }
  long accepted() const { return accepted_; }
  long proposed() const { return proposed_; }

 private:
  IsingModel model_;
  TrotterCouplings couplings_;
  WorldlineConfig config_;
  std::vector<std::vector<std::pair<int, double>>> neighbours_;
  std::mt19937_64 rng_;
  double action_ = 0.0;
  long accepted_ = 0;
  long proposed_ = 0;
};

struct ObservableStats {
  std::string name;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct RunStats {
  int n = 1;
  long sweeps = 0;
  long therm = 0;
  std::uint64_t seed = 0;
  double acceptance = 0.0;
  int bins = 0;
  std::vector<ObservableStats> observables;
  /// Per-sweep measurements after thermalization, keyed like `observables`.
  std::vector<std::vector<double>> traces;

  const ObservableStats& get(const std::string& name) const;
};

constexpr int kMinBins = 20;

/// Observables (layer averages per measured sweep):
///   zz[i,j]       s_i s_j for each bond
///   magnetization mean spin
///   trotter_corr  s_i^(m) s_i^(m+1)
///   energy_diag   -sum J s_i s_j
///   sigma_x       coth(2 eps) - trotter_corr / sinh(2 eps)
RunStats metropolis_run(const IsingModel& m, int n, long sweeps, long therm, std::uint64_t seed,
                        int bins = kMinBins, bool keep_traces = false);

nlohmann::json to_json(const RunStats& r);

constexpr int kInfiniteTrotter = 0;
constexpr int kMaxEnumerationSpins = 24;
constexpr int kMaxDiagonalizationStates = 4096;

struct ExactObservables {
  int n = kInfiniteTrotter;
  double log_z = 0.0;
  std::vector<double> zz;  ///< per bond
  double magnetization = 0.0;
  double trotter_corr = 0.0;  ///< finite n only
  double energy_diag = 0.0;
  double sigma_x = 0.0;  ///< per-site average
};

/// Finite n: exhaustive sum over all 2^(N n) world-line configurations.
/// n = kInfiniteTrotter: thermal averages from dense diagonalization.
ExactObservables exact_reference(const IsingModel& m, int n);

struct ExtrapolationReport {
  std::vector<int> n_values;
  std::vector<double> values;
  std::vector<double> errors;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c0_stderr = 0.0;
  std::vector<double> residuals;
  int dominant_power = 0;  ///< 1 or 2; 0 when the fit failed
  bool ok = false;
  std::string diagnostics;
};

/// Weighted least-squares fit value(n) = c0 + c1/n + c2/n^2. Errors may be
/// empty (unit weights). Needs at least three distinct n.
ExtrapolationReport extrapolate(const std::vector<int>& n_values, const std::vector<double>& values,
                                const std::vector<double>& errors);

/// Monte Carlo values of `observable` for each n, then extrapolated. Each n
/// uses its own seed derived from `seed`.
ExtrapolationReport trotter_extrapolate(const IsingModel& m, const std::vector<int>& n_values, long sweeps,
                                        long therm, std::uint64_t seed, const std::string& observable);

struct AnnealResult {
  double energy = 0.0;
  std::vector<int> configuration;
  int best_layer = 0;
  std::vector<std::string> warnings;
};

constexpr double kGammaFloor = 1e-6;

/// Runs Metropolis stages at decreasing transverse field on one world-line
/// configuration and returns the lowest-energy layer at the end.
AnnealResult anneal(const IsingModel& m, int n, std::vector<double> schedule, long sweeps_per_stage,
                    std::uint64_t seed);

/// Geometric schedule from `start` to `end` in `stages` steps.
std::vector<double> geometric_schedule(double start, double end, int stages);

}  // namespace expprod
