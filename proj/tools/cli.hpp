#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "expprod/rational.hpp"
#include "expprod/schemes.hpp"

namespace expprod::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kNonConvergence = 3,
};

struct StageToken {
  std::string slot;
  Rational coeff;
};

/// "x", "x/2", "-2/3x", "3*x/4", "0.25" -> rational factor of x.
Rational parse_coefficient(std::string text);

/// Mini-grammar SLOT:coeff[,SLOT:coeff...].
std::vector<StageToken> parse_stages(const std::string& text);

/// Two-slot-or-more scheme from a stage string, slots in first-seen order.
Scheme scheme_from_stages(const std::string& text, int claimed_order);

/// Full command-line entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace expprod::cli
