#pragma once

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "expprod/algebraic.hpp"
#include "expprod/lie.hpp"

namespace expprod {

/// Stage coefficient. `exact` is a polynomial in the owning scheme's
/// algebraic constants (a plain rational when constant); `value` always
/// holds the decimal used for numerics.
struct StageCoeff {
  std::optional<Polynomial> exact;
  double value = 0.0;

  static StageCoeff rational(const Rational& q) { return {Polynomial(q), q.get_d()}; }
  static StageCoeff numeric(double v) { return {std::nullopt, v}; }
  static StageCoeff algebraic(const Polynomial& p, const ConstantSet& constants);

  bool is_rational() const { return exact && exact->is_constant(); }
};

bool operator==(const StageCoeff& a, const StageCoeff& b);

/// Exponential of a nested bracket of slots, carrying x^x_power.
struct CommutatorSpec {
  Bracket bracket;  ///< leaves are slot indices
  int x_power = 2;
};

struct Stage {
  int slot = -1;                              ///< valid when !commutator
  std::optional<CommutatorSpec> commutator;   ///< set for commutator stages
  StageCoeff coeff;

  bool is_commutator() const { return commutator.has_value(); }
};

bool operator==(const Stage& a, const Stage& b);

/// Ordered product of stage exponentials, leftmost stage first.
struct Scheme {
  std::string name;
  std::vector<std::string> slots;
  std::vector<Stage> stages;
  int claimed_order = 1;
  bool symmetric = false;
  ConstantSet constants;
  /// Stage list before adjacent same-slot factors were merged.
  std::vector<Stage> unmerged;

  int slot_index(const std::string& label) const;
  std::shared_ptr<const ConstantSet> constant_set() const {
    return std::make_shared<const ConstantSet>(constants);
  }
};

/// Checks slot sums, palindrome flag and commutator shapes; throws
/// std::invalid_argument on violation.
void validate(const Scheme& s);

bool is_palindrome(const std::vector<Stage>& stages);

/// Merges neighbouring stages on the same slot and drops zero stages.
std::vector<Stage> merge_adjacent(const std::vector<Stage>& stages, const ConstantSet& constants);

/// Per-slot coefficient sums (exact when every contributing stage is).
std::vector<StageCoeff> slot_sums(const Scheme& s);

Scheme trotter();
Scheme strang();

/// base(s x) base((1 - 2s) x) base(s x) with 2 s^{2k+1} + (1 - 2s)^{2k+1} = 0.
Scheme triple_jump(const Scheme& base);

/// base(s x)^2 base((1 - 4s) x) base(s x)^2 with 4 s^{2k+1} + (1 - 4s)^{2k+1} = 0.
Scheme quintuple(const Scheme& base);

/// Quintuple recursion started from Strang: order 2 (strang), 4, 6, 8, ...
Scheme fractal(int order);

Scheme ruth();
Scheme hybrid_second();
Scheme hybrid_fourth();

/// Three-part schemes with a shift-time slot "T".
Scheme time_ordered_first();
Scheme time_ordered_second();
Scheme time_ordered_fourth();

bool has_negative_coefficient(const Scheme& s);

/// A/B stage of a three-part scheme with its evaluation time t + tau dt.
struct TimedStage {
  int slot = -1;
  StageCoeff coeff;
  StageCoeff tau;  ///< accumulated shift, exact when the T coefficients are
  double time = 0.0;
};

/// Scans the stages right-to-left, accumulating T coefficients; T stages
/// are consumed and every other stage is emitted in application order.
std::vector<TimedStage> evaluation_times(const Scheme& s, double t, double dt);

/// Scheme with all stages of one slot removed (no merging).
Scheme strip_slot(const Scheme& s, const std::string& label);

/// Named constructions shipped with the library.
std::vector<Scheme> scheme_catalog();
Scheme find_scheme(const std::string& name);

nlohmann::json to_json(const Scheme& s);
Scheme scheme_from_json(const nlohmann::json& j);

/// Defining polynomials of the composition constants, in variable `var`.
Polynomial triple_defining_polynomial(const std::string& var, int base_order);
Polynomial quintuple_defining_polynomial(const std::string& var, int base_order);

// ---------------------------------------------------------------------------
// Series views of a scheme
// ---------------------------------------------------------------------------

/// Exact stage list over Q(constants). Throws if a stage has no exact form.
std::vector<SeriesStage<AlgebraicNumber>> exact_series_stages(const Scheme& s, int order);

/// Floating-point stage list from the decimal coefficients.
std::vector<SeriesStage<double>> numeric_series_stages(const Scheme& s, int order);

bool all_exact(const Scheme& s);

}  // namespace expprod
