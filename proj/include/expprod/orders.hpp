#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "expprod/errors.hpp"
#include "expprod/polynomial.hpp"
#include "expprod/schemes.hpp"

namespace expprod {

/// Polynomial equations (each == 0) in named parameters.
struct OrderConditionSet {
  std::vector<std::string> parameters;
  std::vector<Polynomial> equations;
  std::vector<int> degrees;        ///< correction-term degree of each equation
  std::vector<std::string> labels; ///< Lyndon bracket the equation comes from
  std::string pattern;             ///< slot pattern, empty for hand-built sets
  int order = 0;
};

constexpr int kDefaultTruncationCap = 10;

/// Conditions for the product exp(p1 x X1) ... exp(pM x XM), Xi = pattern[i],
/// to agree with exp(x sum of letters) through degree m. Degree-1 equations
/// are "sum of p - 1"; higher degrees are the raw Lyndon coefficients.
OrderConditionSet order_conditions(const std::string& pattern, int m, int cap = kDefaultTruncationCap);

/// Wraps arbitrary polynomials as a condition set; parameters are the union
/// of their variables, sorted.
OrderConditionSet condition_set(std::vector<Polynomial> equations);

/// Highest k <= m such that all correction terms of degree 2..k vanish and
/// the degree-1 term is the plain sum of the slots. Exact when all stage
/// coefficients are rational, otherwise |coefficient| <= 1e-12 * scale^k
/// with scale = max(1, max |stage coefficient|).
int verify_order(const Scheme& s, int m, int cap = kDefaultTruncationCap);

/// Same check in exact arithmetic over the scheme's algebraic constants.
/// Throws if a stage lacks an exact coefficient.
int verify_order_exact(const Scheme& s, int m, int cap = kDefaultTruncationCap);

struct SolveReport {
  std::map<std::string, double> solution;
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
  double max_residual = 0.0;
};

struct SolveOptions {
  double tolerance = 1e-13;
  int max_iterations = 200;
  int max_halvings = 30;
  /// Extra Newton steps taken after the tolerance is met, while they help.
  int polish_iterations = 3;
  /// Relative shift applied when the iteration stalls at a stationary point.
  double nudge = 1e-3;
  int max_nudges = 5;
};

/// Damped Gauss-Newton on the system with exact polynomial Jacobians;
/// `fixed` parameters are held constant, the others start at `guess`.
SolveReport solve(const OrderConditionSet& conds, const std::map<std::string, double>& fixed,
                  const std::map<std::string, double>& guess, const SolveOptions& options = {});

/// Tries the equal-split start (1/M for every free parameter), then up to
/// `starts` uniform draws in [-1, 1] from a generator seeded with `seed`, and
/// returns the first converged report (or the best one by max residual).
SolveReport solve_multistart(const OrderConditionSet& conds, const std::map<std::string, double>& fixed,
                             int starts, std::uint64_t seed, const SolveOptions& options = {});

struct FamilyPoint {
  double p6 = 0.0;
  std::vector<double> p;  ///< p1..p5
  double max_residual = 0.0;
  bool converged = false;
};

/// Third-order ABABAB solutions along a grid of fixed p6 by continuation
/// outward from the grid point nearest 1, seeded with Ruth's coefficients.
std::vector<FamilyPoint> ruth_family(const std::vector<double>& p6_values);

std::string family_csv(const std::vector<FamilyPoint>& curve);

nlohmann::json to_json(const OrderConditionSet& c);

/// Scheme with stages exp(p_i x pattern[i]) at the given values.
Scheme scheme_from_pattern(const std::string& pattern, const std::vector<double>& values, int claimed_order);

}  // namespace expprod
